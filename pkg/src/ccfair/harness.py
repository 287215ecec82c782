"""Experiment orchestration: seeded runs, parallel scheduling, aggregation.

A SimulationConfig fully determines every run: simulation ``seed`` s uses
the stream Philox(SeedSequence([master_seed, s])), so outputs depend only
on (config, seed list), never on worker count or completion order.

Emitted artifacts:

- ``creators.csv``:  seed,t,creator_rank,followers,cc_fair (long form)
- ``timesteps.csv``: seed,t,dissatisfaction,fraction_no_follow,fair_all
- ``report.json``:   config + provenance + aggregate tables
- ``sweep.csv``:     ratio,policy,fair_mean,ci_lo,ci_hi (ratio sweeps)
- ``terciles.csv``:  tercile,lo_rank,hi_rank,fair_mean,ci_lo,ci_hi
"""

from __future__ import annotations

import concurrent.futures
import functools
import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigurationError, InputDataError
from .metrics import Z95, aggregate, record_metrics
from .model import apply_step, is_absorbing_noiseless, new_platform
from .movielens import init_state_from_snapshot, load_snapshot
from .policies import MAX_PERMUTATION_N, PolicySpec, build_policy

RECORD_DENSE_UNTIL = 100
RECORD_SPARSE_STRIDE = 10


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a single run depends on, JSON-serializable.

    ``seeds`` is either a count (runs 0..count-1) or an explicit tuple;
    ``record_every`` is a stride or "auto" (every step up to t=100, then
    every 10th, plus the horizon).
    """

    n: int
    m: int
    policy: str = "popularity"
    p: float = 1.0
    steps: int = 100
    seeds: Union[int, tuple] = 1
    master_seed: int = 0
    record_every: Union[str, int] = "auto"
    early_stop: bool = False
    init_snapshot: Optional[str] = None
    strict_groups: bool = True

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigurationError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"p must be in [0, 1], got {self.p}")
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        spec = PolicySpec.parse(self.policy)
        if spec.kind == "pairwise":
            if self.steps < 2:
                raise ConfigurationError("pairwise policies need steps >= 2")
            groups = self.n * (self.n - 1)
            if self.n < 2 or self.m < groups:
                raise ConfigurationError(
                    f"pairwise policies need m >= n(n-1) = {groups}, got m={self.m}"
                )
            if self.strict_groups and self.m % groups:
                raise ConfigurationError(
                    f"strict pairwise mode needs m divisible by n(n-1) = {groups}, "
                    f"got m={self.m}"
                )
        if spec.kind == "permutation":
            if self.n > MAX_PERMUTATION_N:
                raise ConfigurationError(
                    f"permutation policy supported up to n={MAX_PERMUTATION_N}, "
                    f"got n={self.n}"
                )
            rows = math.factorial(self.n)
            if self.m % rows or self.m < rows:
                raise ConfigurationError(
                    f"permutation policy needs m to be a positive multiple of "
                    f"{self.n}! = {rows}, got m={self.m}"
                )
            if self.steps > self.n:
                raise ConfigurationError(
                    f"permutation schedule has exactly n={self.n} steps; "
                    f"steps={self.steps} is past the end"
                )
        if isinstance(self.record_every, str):
            if self.record_every != "auto":
                raise ConfigurationError(
                    f'record_every must be "auto" or a positive integer, '
                    f"got {self.record_every!r}"
                )
        elif self.record_every < 1:
            raise ConfigurationError(
                f"record_every must be >= 1, got {self.record_every}"
            )
        if isinstance(self.seeds, int):
            if self.seeds < 1:
                raise ConfigurationError(f"need at least one seed, got {self.seeds}")
        else:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            if not self.seeds:
                raise ConfigurationError("need at least one seed, got an empty list")
            if len(set(self.seeds)) != len(self.seeds):
                raise ConfigurationError("seed list contains duplicates")

    @property
    def seed_list(self) -> tuple:
        if isinstance(self.seeds, int):
            return tuple(range(self.seeds))
        return self.seeds

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(
                f"unknown config key(s): {', '.join(sorted(unknown))}"
            )
        if "seeds" in data and isinstance(data["seeds"], list):
            data = dict(data, seeds=tuple(data["seeds"]))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "SimulationConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"missing config file: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: bad JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def recorded_ts(steps: int, record_every: Union[str, int] = "auto") -> tuple:
    """Timesteps whose metrics are kept; the horizon is always included."""
    if record_every == "auto":
        ts = set(range(1, min(RECORD_DENSE_UNTIL, steps) + 1))
        ts.update(range(RECORD_DENSE_UNTIL + RECORD_SPARSE_STRIDE, steps + 1,
                        RECORD_SPARSE_STRIDE))
    else:
        ts = set(range(record_every, steps + 1, record_every))
    ts.add(steps)
    return tuple(sorted(ts))


@dataclass(frozen=True)
class SimResult:
    """Metrics time series of one seeded run."""

    seed: int
    records: tuple
    final_t: int
    stopped_early: bool


def simulation_rng(master_seed: int, seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, seed])))


# Re-parsing the same snapshot for every seed would dominate small runs;
# the file is read once per process instead.
@functools.lru_cache(maxsize=8)
def _cached_snapshot(path: str):
    snap, _ = load_snapshot(path)
    return snap


def _initial_state(config: SimulationConfig):
    if config.init_snapshot is None:
        return new_platform(config.n, config.m)
    snap = _cached_snapshot(config.init_snapshot)
    if snap.n != config.n or snap.m != config.m:
        raise InputDataError(
            f"snapshot {config.init_snapshot} is for n={snap.n}, m={snap.m}; "
            f"config says n={config.n}, m={config.m}"
        )
    return init_state_from_snapshot(snap)


def run_simulation(config: SimulationConfig, seed: int) -> SimResult:
    """One seeded run: recommend, apply, record, with optional early stop.

    Draw order is fixed per step (policy first, then accept draws), so
    the trajectory is a pure function of (config, seed).
    """
    rng = simulation_rng(config.master_seed, seed)
    state = _initial_state(config)
    policy = build_policy(
        PolicySpec.parse(config.policy), config.n, config.m,
        rng=rng, strict=config.strict_groups,
    )
    record_at = set(recorded_ts(config.steps, config.record_every))
    noiseless = config.p == 1.0
    records = []
    stopped = False
    for t in range(1, config.steps + 1):
        rec = policy.recommend(state, rng)
        apply_step(state, rec, p=config.p, rng=None if noiseless else rng)
        if t in record_at:
            records.append(record_metrics(state))
        if config.early_stop and noiseless and is_absorbing_noiseless(state):
            stopped = t < config.steps
            break
    if not records or records[-1].t != state.t:
        records.append(record_metrics(state))
    return SimResult(
        seed=seed, records=tuple(records), final_t=state.t, stopped_early=stopped
    )


def _run_one(payload):
    config, seed = payload
    return run_simulation(config, seed)


def _run_all(config: SimulationConfig, workers: int):
    """All seeds, in seed order; failures collected instead of raised."""
    seeds = config.seed_list
    results: dict[int, SimResult] = {}
    errors: dict[int, Exception] = {}
    if workers <= 1:
        for seed in seeds:
            try:
                results[seed] = run_simulation(config, seed)
            except Exception as exc:  # noqa: BLE001 - reported, run flagged invalid
                errors[seed] = exc
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_run_one, (config, s)): s for s in seeds}
            for fut in concurrent.futures.as_completed(futs):
                seed = futs[fut]
                try:
                    results[seed] = fut.result()
                except Exception as exc:  # noqa: BLE001
                    errors[seed] = exc
    failures = [
        {"seed": s, "error": f"{type(errors[s]).__name__}: {errors[s]}"}
        for s in sorted(errors)
    ]
    ordered = [results[s] for s in seeds if s in results]
    first_error = errors[min(errors)] if errors else None
    return ordered, failures, first_error


def _long_frames(results: Sequence[SimResult], n: int):
    """Assemble the two long-form tables from per-seed records."""
    ranks = np.arange(1, n + 1, dtype=np.int64)
    c_seed, c_t, c_rank, c_followers, c_fair = [], [], [], [], []
    t_rows = []
    for res in results:
        for rec in res.records:
            c_seed.append(np.full(n, res.seed, dtype=np.int64))
            c_t.append(np.full(n, rec.t, dtype=np.int64))
            c_rank.append(ranks)
            c_followers.append(rec.followers)
            c_fair.append(rec.fairness.per_creator.astype(np.int64))
            t_rows.append(
                (
                    res.seed,
                    rec.t,
                    np.nan if rec.dissatisfaction is None else rec.dissatisfaction,
                    rec.fraction_no_follow,
                    int(rec.fairness.overall),
                )
            )
    creators = pd.DataFrame(
        {
            "seed": np.concatenate(c_seed),
            "t": np.concatenate(c_t),
            "creator_rank": np.concatenate(c_rank),
            "followers": np.concatenate(c_followers),
            "cc_fair": np.concatenate(c_fair),
        }
    )
    timesteps = pd.DataFrame(
        t_rows, columns=["seed", "t", "dissatisfaction", "fraction_no_follow", "fair_all"]
    )
    return creators, timesteps


def _jsonsafe(records: list) -> list:
    """Plain-Python record dicts: numpy scalars unboxed, NaN mapped to null."""
    out = []
    for row in records:
        clean = {}
        for key, value in row.items():
            if isinstance(value, np.integer):
                value = int(value)
            elif isinstance(value, (np.floating, float)):
                value = float(value)
                if math.isnan(value):
                    value = None
            clean[key] = value
        out.append(clean)
    return out


def _proportion_table(grouped: pd.DataFrame, value: str) -> pd.DataFrame:
    """Mean and clipped binomial 95% CI for a 0/1 column, per group."""
    mean = grouped[value].mean()
    nobs = grouped[value].count()
    half = Z95 * np.sqrt(mean * (1.0 - mean) / nobs)
    return pd.DataFrame(
        {
            "fair_mean": mean,
            "ci_lo": np.clip(mean - half, 0.0, 1.0),
            "ci_hi": np.clip(mean + half, 0.0, 1.0),
            "nobs": nobs,
        }
    ).reset_index()


def _mean_table(series_by_group) -> pd.DataFrame:
    mean = series_by_group.mean()
    std = series_by_group.std(ddof=1)
    nobs = series_by_group.count()
    half = Z95 * std / np.sqrt(nobs)
    return pd.DataFrame(
        {"mean": mean, "ci_lo": mean - half, "ci_hi": mean + half, "nobs": nobs}
    ).reset_index()


def simulation_frames(result: SimResult, n: int):
    """Long-form (creators, timesteps) tables for a single run."""
    return _long_frames([result], n)


@dataclass(frozen=True)
class ExperimentOutput:
    """Long-form tables plus the aggregate report of one experiment."""

    config: SimulationConfig
    creators: pd.DataFrame
    timesteps: pd.DataFrame
    report: dict

    def write(self, outdir) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        self.creators.to_csv(outdir / "creators.csv", index=False)
        self.timesteps.to_csv(outdir / "timesteps.csv", index=False)
        with (outdir / "report.json").open("w", encoding="utf-8") as fh:
            json.dump(self.report, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_experiment(config: SimulationConfig, workers: int = 1) -> ExperimentOutput:
    """Run every seed, assemble long-form tables, aggregate across seeds.

    Worker failures do not abort the experiment: completed seeds are
    aggregated and the report carries ``invalid: true`` plus the
    per-seed errors.
    """
    started = time.perf_counter()
    if config.init_snapshot is not None and not Path(config.init_snapshot).exists():
        raise InputDataError(f"missing snapshot file: {config.init_snapshot}")
    results, failures, first_error = _run_all(config, workers)
    if not results:
        raise first_error if first_error is not None else ConfigurationError(
            "no seeds ran"
        )
    creators, timesteps = _long_frames(results, config.n)

    final_t = int(creators["t"].max())
    at_final = creators[creators["t"] == final_t]
    by_creator = _proportion_table(at_final.groupby("creator_rank"), "cc_fair")
    by_creator["followers_mean"] = (
        at_final.groupby("creator_rank")["followers"].mean().to_numpy()
    )

    fair_all = _proportion_table(timesteps.groupby("t"), "fair_all").rename(
        columns={"fair_mean": "fair_all_mean"}
    )
    indicator = (
        creators.groupby(["seed", "t"])["cc_fair"].mean().rename("fair_indicator")
    )
    fair_ind = _mean_table(indicator.reset_index().groupby("t")["fair_indicator"])
    fair_ind = fair_ind.rename(
        columns={"mean": "fair_indicator_mean", "ci_lo": "fair_indicator_lo",
                 "ci_hi": "fair_indicator_hi"}
    )
    dissat = _mean_table(timesteps.groupby("t")["dissatisfaction"]).rename(
        columns={"mean": "dissatisfaction_mean", "ci_lo": "dissatisfaction_lo",
                 "ci_hi": "dissatisfaction_hi", "nobs": "dissatisfaction_nobs"}
    )

    report = {
        "config": config.to_dict(),
        "config_hash": config.config_hash,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
        },
        "workers": workers,
        "wall_time_s": round(time.perf_counter() - started, 3),
        "seeds_requested": len(config.seed_list),
        "seeds_completed": len(results),
        "failures": failures,
        "invalid": bool(failures),
        "final_t": final_t,
        "stopped_early": int(sum(r.stopped_early for r in results)),
        "by_creator_final": _jsonsafe(by_creator.to_dict(orient="records")),
        "fair_all_by_t": _jsonsafe(fair_all.to_dict(orient="records")),
        "fair_indicator_by_t": _jsonsafe(fair_ind.to_dict(orient="records")),
        "dissatisfaction_by_t": _jsonsafe(dissat.to_dict(orient="records")),
    }
    return ExperimentOutput(
        config=config, creators=creators, timesteps=timesteps, report=report
    )


def final_fair_indicator(output: ExperimentOutput) -> tuple[float, float, float]:
    """Mean fraction of fairly treated creators at the horizon, with CI."""
    final_t = output.report["final_t"]
    at_final = output.creators[output.creators["t"] == final_t]
    per_seed = at_final.groupby("seed")["cc_fair"].mean().to_numpy()
    agg = aggregate(per_seed)
    return float(agg.mean), float(np.clip(agg.ci_lo, 0, 1)), float(np.clip(agg.ci_hi, 0, 1))


def sweep_ratios(
    base: SimulationConfig,
    snapshots: dict,
    policies: Sequence[str],
    workers: int = 1,
    outdir=None,
) -> pd.DataFrame:
    """One experiment per (snapshot ratio, policy); Fig.-4-style table.

    ``snapshots`` maps ratio (float) to a snapshot file path; the fair
    metric is the final-horizon per-creator fairness indicator averaged
    over creators and seeds. With ``outdir`` set, per-cell long CSVs are
    written under ratio-<r>/<policy>/ next to the summary ``sweep.csv``.
    """
    if not policies:
        raise ConfigurationError("sweep needs at least one policy")
    for name in policies:
        PolicySpec.parse(name)
    rows = []
    for ratio in sorted(snapshots):
        path = Path(snapshots[ratio])
        if not path.exists():
            raise InputDataError(f"missing snapshot for ratio {ratio}: {path}")
        for name in policies:
            config = replace(base, policy=name, init_snapshot=str(path))
            output = run_experiment(config, workers=workers)
            fair, lo, hi = final_fair_indicator(output)
            rows.append(
                {"ratio": float(ratio), "policy": name,
                 "fair_mean": fair, "ci_lo": lo, "ci_hi": hi}
            )
            if outdir is not None:
                output.write(Path(outdir) / f"ratio-{ratio:.6g}" / name.replace("+", "-"))
    table = pd.DataFrame(rows, columns=["ratio", "policy", "fair_mean", "ci_lo", "ci_hi"])
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        table.to_csv(outdir / "sweep.csv", index=False)
    return table


def tercile_bounds(n: int) -> tuple:
    """Quality terciles by rank: equal thirds, remainder to the bottom group."""
    third = n // 3
    return (
        ("top", 1, third),
        ("middle", third + 1, 2 * third),
        ("bottom", 2 * third + 1, n),
    )


def tercile_report(creators: pd.DataFrame, n: int, t: Optional[int] = None) -> pd.DataFrame:
    """Fairness proportion per quality tercile at one timestep (default: last)."""
    if t is None:
        t = int(creators["t"].max())
    at_t = creators[creators["t"] == t]
    rows = []
    for label, lo_rank, hi_rank in tercile_bounds(n):
        cell = at_t[
            (at_t["creator_rank"] >= lo_rank) & (at_t["creator_rank"] <= hi_rank)
        ]
        per_seed = cell.groupby("seed")["cc_fair"].mean()
        mean = float(per_seed.mean())
        nobs = int(per_seed.count())
        if nobs >= 2:
            half = float(Z95 * per_seed.std(ddof=1) / np.sqrt(nobs))
        else:
            half = 0.0
        rows.append(
            {
                "tercile": label,
                "lo_rank": lo_rank,
                "hi_rank": hi_rank,
                "fair_mean": mean,
                "ci_lo": max(0.0, mean - half),
                "ci_hi": min(1.0, mean + half),
            }
        )
    return pd.DataFrame(rows)
