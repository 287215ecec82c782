"""Drawing routines, one per figure kind.

Series preparation is split out from axes work so the data contracts
(what gets averaged, which timesteps are dropped) are testable without
rasterizing anything. Confidence intervals are only ever read from the
input tables; this package computes plain means and nothing else.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.lines import Line2D

from .errors import InputDataError
from .io import (
    CREATORS_COLUMNS,
    SWEEP_COLUMNS,
    TERCILES_COLUMNS,
    TIMESTEPS_COLUMNS,
    load_table,
    per_policy_tables,
)
from .spec import colors_for, policy_order


# --- series preparation ----------------------------------------------------


def fairness_by_rank_series(creators: pd.DataFrame, t=None):
    """(ranks, fraction of runs fair per rank) at one timestep (default last)."""
    if t is None:
        t = int(creators["t"].max())
    at_t = creators[creators["t"] == t]
    if at_t.empty:
        raise InputDataError(f"no creator rows at t={t}")
    grouped = at_t.groupby("creator_rank")["cc_fair"].mean()
    return grouped.index.to_numpy(), grouped.to_numpy(dtype=float)


def fairness_over_time_series(creators: pd.DataFrame):
    """(ts, mean fraction of creators treated fairly, averaged over runs)."""
    indicator = creators.groupby(["seed", "t"])["cc_fair"].mean().reset_index()
    grouped = indicator.groupby("t")["cc_fair"].mean()
    return grouped.index.to_numpy(), grouped.to_numpy(dtype=float)


def dissatisfaction_series(policy: str, timesteps: pd.DataFrame):
    """(ts, mean dissatisfaction); pairwise policies drop the two exploration steps.

    Rows where every user follows no one serialize an empty value; those
    are excluded from the mean rather than treated as zero.
    """
    table = timesteps
    if policy.startswith("pairwise"):
        table = table[table["t"] > 2]
    values = pd.to_numeric(table["dissatisfaction"], errors="coerce")
    keep = table.assign(dissatisfaction=values).dropna(subset=["dissatisfaction"])
    if keep.empty:
        raise InputDataError(f"{policy}: no dissatisfaction values to plot")
    grouped = keep.groupby("t")["dissatisfaction"].mean()
    return grouped.index.to_numpy(), grouped.to_numpy(dtype=float)


def excluded_fraction_label(policy: str, timesteps: pd.DataFrame) -> str:
    """Annotation line: share of users the dissatisfaction mean excludes."""
    final_t = int(timesteps["t"].max())
    frac = float(
        timesteps.loc[timesteps["t"] == final_t, "fraction_no_follow"].mean()
    )
    return f"{policy}: {frac:.1%} of users follow no one at t={final_t}"


# --- drawers ---------------------------------------------------------------


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), constrained_layout=True)
    if title:
        ax.set_title(title)
    return fig, ax


def _plot_by_rank(ax, pairs, colors):
    for name, table in pairs:
        ranks, fair = fairness_by_rank_series(table)
        ax.plot(
            ranks, fair, marker="o", markersize=3, linewidth=1.4,
            color=colors[name], label=name,
        )
    ax.set_ylim(-0.04, 1.04)


def draw_fairness_by_rank(spec):
    pairs = per_policy_tables(spec.kind, spec.inputs.get("creators"), CREATORS_COLUMNS)
    colors = colors_for([name for name, _ in pairs])
    fig, ax = _new_axes(spec.title)
    _plot_by_rank(ax, pairs, colors)
    ax.set_xlabel("creator rank (1 = best)")
    ax.set_ylabel("fraction of runs treated fairly")
    ax.legend(loc="lower right", fontsize=8)
    return fig


def draw_fairness_over_time(spec):
    pairs = per_policy_tables(spec.kind, spec.inputs.get("creators"), CREATORS_COLUMNS)
    colors = colors_for([name for name, _ in pairs])
    fig, ax = _new_axes(spec.title)
    for name, table in pairs:
        ts, means = fairness_over_time_series(table)
        ax.plot(ts, means, linewidth=1.4, color=colors[name], label=name)
    ax.set_xlabel("timestep")
    ax.set_ylabel("mean fraction of creators treated fairly")
    ax.set_ylim(-0.04, 1.04)
    ax.legend(loc="lower right", fontsize=8)
    return fig


def draw_dissatisfaction(spec):
    pairs = per_policy_tables(
        spec.kind, spec.inputs.get("timesteps"), TIMESTEPS_COLUMNS
    )
    colors = colors_for([name for name, _ in pairs])
    fig, ax = _new_axes(spec.title)
    for name, table in pairs:
        ts, means = dissatisfaction_series(name, table)
        ax.plot(ts, means, linewidth=1.4, color=colors[name], label=name)
    note = "\n".join(excluded_fraction_label(name, table) for name, table in pairs)
    ax.text(
        0.98, 0.98, note, transform=ax.transAxes, ha="right", va="top",
        fontsize=7, bbox=dict(boxstyle="round,pad=0.35", facecolor="white",
                              edgecolor="0.7"),
    )
    ax.set_xlabel("timestep")
    ax.set_ylabel("mean dissatisfaction (rank of best followed creator)")
    ax.legend(loc="center right", fontsize=8)
    return fig


def _ci_whiskers(table: pd.DataFrame) -> np.ndarray:
    mean = table["fair_mean"].to_numpy(dtype=float)
    lower = mean - table["ci_lo"].to_numpy(dtype=float)
    upper = table["ci_hi"].to_numpy(dtype=float) - mean
    return np.clip(np.vstack([lower, upper]), 0.0, None)


def draw_ratio_sweep(spec):
    path = spec.inputs.get("sweep")
    if not isinstance(path, (str, os.PathLike)) or not str(path):
        raise InputDataError(f'{spec.kind}: expected a "sweep" CSV path')
    table = load_table(path, SWEEP_COLUMNS)
    ratios = sorted(table["ratio"].unique())
    policies = policy_order(table["policy"].unique())
    colors = colors_for(policies)
    fig, ax = _new_axes(spec.title)
    x = np.arange(len(ratios), dtype=float)
    width = 0.8 / len(policies)
    for pos, name in enumerate(policies):
        sub = (
            table[table["policy"] == name]
            .drop_duplicates("ratio")
            .set_index("ratio")
            .reindex(ratios)
        )
        if sub["fair_mean"].isna().any():
            gone = [f"{r:g}" for r, v in zip(ratios, sub["fair_mean"]) if pd.isna(v)]
            raise InputDataError(
                f"{spec.kind}: policy {name!r} has no row for ratio(s): "
                f"{', '.join(gone)}"
            )
        ax.bar(
            x + (pos - (len(policies) - 1) / 2) * width,
            sub["fair_mean"].to_numpy(dtype=float),
            width=0.92 * width,
            color=colors[name],
            label=name,
            yerr=_ci_whiskers(sub),
            capsize=3,
            error_kw={"linewidth": 1},
        )
    ax.set_xticks(x)
    ax.set_xticklabels([f"{r:g}" for r in ratios])
    ax.set_xlabel("history snapshot ratio")
    ax.set_ylabel("fraction of creators treated fairly")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    return fig


def draw_tercile_bars(spec):
    pairs = per_policy_tables(spec.kind, spec.inputs.get("terciles"), TERCILES_COLUMNS)
    colors = colors_for([name for name, _ in pairs])
    labels = pairs[0][1]["tercile"].tolist()
    for name, table in pairs[1:]:
        if table["tercile"].tolist() != labels:
            raise InputDataError(
                f"{spec.kind}: tercile rows disagree between policies "
                f"({labels} vs {table['tercile'].tolist()} for {name!r})"
            )
    fig, ax = _new_axes(spec.title)
    x = np.arange(len(labels), dtype=float)
    width = 0.8 / len(pairs)
    for pos, (name, table) in enumerate(pairs):
        ax.bar(
            x + (pos - (len(pairs) - 1) / 2) * width,
            table["fair_mean"].to_numpy(dtype=float),
            width=0.92 * width,
            color=colors[name],
            label=name,
            yerr=_ci_whiskers(table),
            capsize=3,
            error_kw={"linewidth": 1},
        )
    first = pairs[0][1]
    ax.set_xticks(x)
    ax.set_xticklabels(
        [
            f"{label}\n(ranks {lo}-{hi})"
            for label, lo, hi in zip(labels, first["lo_rank"], first["hi_rank"])
        ]
    )
    ax.set_xlabel("quality tercile")
    ax.set_ylabel("fraction of creators treated fairly")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="upper right", fontsize=8)
    return fig


def _panel_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def draw_fairness_by_rank_grid(spec):
    panels = spec.inputs.get("panels")
    if not isinstance(panels, dict) or not panels:
        raise InputDataError(
            f'{spec.kind}: expected a non-empty "panels" mapping of '
            f"label -> {{policy: creators csv}}"
        )
    labels = sorted(panels, key=_panel_key)
    loaded = {
        label: per_policy_tables(spec.kind, panels[label], CREATORS_COLUMNS)
        for label in labels
    }
    all_policies = policy_order(
        {name for pairs in loaded.values() for name, _ in pairs}
    )
    colors = colors_for(all_policies)
    ncols = min(3, len(labels))
    nrows = math.ceil(len(labels) / ncols)
    fig, axes = plt.subplots(
        nrows, ncols,
        figsize=(3.0 * ncols + 0.8, 2.5 * nrows + 1.0),
        sharey=True, squeeze=False, constrained_layout=True,
    )
    for ax, label in zip(axes.flat, labels):
        _plot_by_rank(ax, loaded[label], colors)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("creator rank", fontsize=8)
    for ax in axes.flat[len(labels):]:
        ax.axis("off")
    axes[0][0].set_ylabel("fraction fair", fontsize=8)
    handles = [
        Line2D([], [], color=colors[name], marker="o", markersize=3,
               linewidth=1.4, label=name)
        for name in all_policies
    ]
    fig.legend(handles=handles, loc="outside lower center",
               ncol=min(4, len(handles)), fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    return fig


DRAWERS = {
    "fairness-by-rank": draw_fairness_by_rank,
    "fairness-over-time": draw_fairness_over_time,
    "dissatisfaction": draw_dissatisfaction,
    "ratio-sweep": draw_ratio_sweep,
    "tercile-bars": draw_tercile_bars,
    "fairness-by-rank-grid": draw_fairness_by_rank_grid,
}
