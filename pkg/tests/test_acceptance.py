"""Numbered acceptance gates for the whole package.

Run with ``pytest tests/test_acceptance.py -s`` to see one
``criterion N: PASS/FAIL - detail`` line per gate (the line is printed
before the assertion, so failures still report). Expected values come
from closed forms, exact enumeration, or committed hand-checked
goldens, never from the code under test.

Two gates are environment-dependent:

* criterion 6 (full-scale spot check, ~hours) runs only with
  ``CCFAIR_FULL_SCALE=1``;
* criterion 8 needs the real MovieLens dataset via
  ``CCFAIR_MOVIELENS_DIR``; without it the criterion is skipped and a
  supplementary trend check runs on a committed synthetic corpus whose
  history the simulator itself generated (see tests/synthetic_data.py).
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import synthetic_data
from ccfair.harness import (
    SimulationConfig,
    run_experiment,
    sweep_ratios,
    tercile_report,
)
from ccfair.metrics import fairness_vector
from ccfair.model import apply_step, is_absorbing_noiseless, new_platform
from ccfair.movielens import (
    binarize,
    load_imdb_ratings,
    load_ratings,
    prep_pipeline,
    select_corpus,
    snapshot,
)
from ccfair.policies import (
    build_policy,
    make_pairwise_schedule,
    recommend_pairwise,
    recommend_permutation,
)
from ccfair.theory import (
    min_group_size,
    sample_fair_state,
    validate_fair_maintenance,
    validate_pairwise_noise,
)

DESK_POLICIES = ("random", "popularity", "pairwise+random", "pairwise+popularity")
PAIRWISE = ("pairwise+random", "pairwise+popularity")
BARE = ("random", "popularity")


def _report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    assert ok, line


def _skip(num, detail):
    print(f"criterion {num}: SKIP - {detail}", flush=True)
    pytest.skip(detail)


# --- exact closed forms ----------------------------------------------------


def test_criterion_1_pairwise_follower_counts():
    started = time.perf_counter()
    bad = []
    for n in range(2, 31):
        for k in range(1, 6):
            m = k * n * (n - 1)
            rng = np.random.Generator(np.random.Philox(100 * n + k))
            sched = make_pairwise_schedule(n, m, rng)
            state = new_platform(n, m)
            apply_step(state, recommend_pairwise(sched, 1))
            apply_step(state, recommend_pairwise(sched, 2))
            expected = np.array(
                [k * (2 * n - i - 1) for i in range(1, n + 1)], dtype=np.int64
            )
            if not np.array_equal(state.followers, expected):
                bad.append((n, k, "followers"))
            elif not fairness_vector(state.followers).overall:
                bad.append((n, k, "fairness"))
    elapsed = time.perf_counter() - started
    _report(
        1,
        not bad and elapsed < 5.0,
        f"followers at t=2 equal k(2n-i-1) with all-fair outcome for "
        f"n=2..30, k=1..5 in {elapsed:.2f}s"
        + (f"; mismatches {bad[:3]}" if bad else ""),
    )


def test_criterion_2_permutation_follower_counts():
    started = time.perf_counter()
    bad = []
    for n in range(2, 7):
        for k in (1, 2):
            m = k * math.factorial(n)
            state = new_platform(n, m)
            for t in range(1, n + 1):
                apply_step(state, recommend_permutation(n, m, t))
            expected = np.array(
                [k * math.factorial(n) // i for i in range(1, n + 1)], dtype=np.int64
            )
            if not np.array_equal(state.followers, expected):
                bad.append((n, k, "followers"))
                continue
            if not is_absorbing_noiseless(state):
                bad.append((n, k, "not absorbing"))
                continue
            rng = np.random.Generator(np.random.Philox(200 * n + k))
            moved = sum(
                apply_step(
                    state, rng.integers(1, n + 1, size=m).astype(np.int32)
                ).count
                for _ in range(5)
            )
            if moved or not np.array_equal(state.followers, expected):
                bad.append((n, k, "changed after absorption"))
    elapsed = time.perf_counter() - started
    _report(
        2,
        not bad and elapsed < 5.0,
        f"followers at t=n equal k*n!/i and the state is absorbing for "
        f"n=2..6, k=1..2 in {elapsed:.2f}s"
        + (f"; mismatches {bad[:3]}" if bad else ""),
    )


def test_criterion_3_noise_moments_and_group_size():
    trials = 100_000
    parts = []
    ok = True
    for p in (0.6, 0.8, 0.95):
        rng = np.random.Generator(np.random.Philox(10_000 + round(100 * p)))
        rep = validate_pairwise_noise(p, 100, trials, rng)
        stderr = math.sqrt(rep.expected_var_s / trials)
        mean_ok = abs(rep.mean_s - rep.expected_mean_s) <= 4 * stderr
        var_ok = abs(rep.var_s - rep.expected_var_s) <= 0.05 * rep.expected_var_s
        kstar = min_group_size(p)
        sized = validate_pairwise_noise(p, kstar, trials, rng)
        prob_ok = sized.prob_s_positive >= 0.95
        ok = ok and mean_ok and var_ok and prob_ok
        parts.append(
            f"p={p}: mean {rep.mean_s:.2f} vs {rep.expected_mean_s:.2f}, "
            f"var {rep.var_s:.1f} vs {rep.expected_var_s:.1f}, "
            f"P(S>0)={sized.prob_s_positive:.4f} at k={kstar}"
        )
    _report(3, ok, "; ".join(parts))


def test_criterion_4_fair_maintenance_probability():
    rng = np.random.Generator(np.random.Philox(77))
    rep = validate_fair_maintenance(
        3, 30, lambda r: sample_fair_state(3, 30, r), 10_000, rng
    )
    _report(
        4,
        rep.ci_lo > 0.5,
        f"one popularity step keeps a sampled fair state fair with "
        f"probability {rep.prob_fair:.4f} (95% CI lower bound {rep.ci_lo:.4f} > 0.5, "
        f"n=3, m=30, 10000 trials)",
    )


# --- desk-scale replication ------------------------------------------------


@pytest.fixture(scope="module")
def desk_scale():
    """2000-seed experiments for every policy at n=20, m=1900, T=300."""
    reports = {}
    started = time.perf_counter()
    for policy in DESK_POLICIES:
        config = SimulationConfig(
            n=20, m=1900, policy=policy, p=1.0, steps=300, seeds=2000
        )
        reports[policy] = run_experiment(config).report
    reports["_wall_s"] = time.perf_counter() - started
    return reports


def _min_creator_fair(report):
    return min(row["fair_mean"] for row in report["by_creator_final"])


def _indicator_at(report, t):
    for row in report["fair_indicator_by_t"]:
        if row["t"] == t:
            return row["fair_indicator_mean"]
    raise AssertionError(f"t={t} not recorded")


def test_criterion_5a_pairwise_dominates_at_horizon(desk_scale):
    mins = {policy: _min_creator_fair(desk_scale[policy]) for policy in DESK_POLICIES}
    ok = all(mins[pw] > mins[base] for pw in PAIRWISE for base in BARE)
    detail = ", ".join(f"{policy} {mins[policy]:.3f}" for policy in DESK_POLICIES)
    _report(
        "5a",
        ok,
        f"minimum per-creator fairness at T=300: {detail} "
        f"(4x2000 seeds in {desk_scale['_wall_s']:.0f}s, single worker)",
    )


def test_criterion_5b_pairwise_early_fairness(desk_scale):
    vals = {
        policy: (_indicator_at(desk_scale[policy], 2), _indicator_at(desk_scale[policy], 5))
        for policy in PAIRWISE
    }
    ok = all(at2 == 1.0 and at5 >= 0.75 for at2, at5 in vals.values())
    detail = ", ".join(
        f"{policy}: t=2 {at2:.3f}, t=5 {at5:.3f}" for policy, (at2, at5) in vals.items()
    )
    _report("5b", ok, f"fairness indicator {detail} (need 1.0 at t=2, >= 0.75 at t=5)")


def test_criterion_5c_dissatisfaction_tracks_popularity(desk_scale):
    pw = {
        row["t"]: row["dissatisfaction_mean"]
        for row in desk_scale["pairwise+popularity"]["dissatisfaction_by_t"]
    }
    pop = {
        row["t"]: row["dissatisfaction_mean"]
        for row in desk_scale["popularity"]["dissatisfaction_by_t"]
    }
    ts = sorted(t for t in pw if t > 10 and t in pop)
    assert ts, "no recorded timesteps past t=10"
    gaps = {t: abs(pw[t] - pop[t]) / pop[t] for t in ts}
    worst = max(gaps, key=gaps.get)
    _report(
        "5c",
        gaps[worst] <= 0.10,
        f"pairwise+popularity dissatisfaction within {gaps[worst]:.1%} of bare "
        f"popularity over recorded t in [{ts[0]}, {ts[-1]}] (worst at t={worst}; "
        f"10% allowed)",
    )


def test_criterion_6_full_scale_spot_check():
    if os.environ.get("CCFAIR_FULL_SCALE") != "1":
        _skip(
            6,
            "full-scale spot check (n=100, m=49500, 1000 seeds, T=1000) runs "
            "only with CCFAIR_FULL_SCALE=1; expect hours on a small machine",
        )
    mins = {}
    for policy in DESK_POLICIES:
        config = SimulationConfig(
            n=100, m=49_500, policy=policy, p=1.0, steps=1000, seeds=1000
        )
        output = run_experiment(config, workers=os.cpu_count() or 1)
        mins[policy] = _min_creator_fair(output.report)
    ok = all(mins[pw] >= 0.75 for pw in PAIRWISE) and all(
        0.52 <= mins[base] <= 0.63 for base in BARE
    )
    detail = ", ".join(f"{policy} {mins[policy]:.3f}" for policy in DESK_POLICIES)
    _report(
        6,
        ok,
        f"minimum per-creator fairness: {detail} (need >= 0.75 pairwise, "
        f"0.52..0.63 baselines)",
    )


# --- interaction-log pipeline ----------------------------------------------


def test_criterion_7_pipeline_goldens(tiny_movielens):
    log = load_ratings(
        tiny_movielens / "ratings.csv",
        tiny_movielens / "movies.csv",
        tiny_movielens / "links.csv",
    )
    imdb = load_imdb_ratings(tiny_movielens / "imdb.tsv")
    corpus = select_corpus(log, imdb, genre="Film-Noir", n=3, target_users=6, seed=0)
    checks = [
        ("ranking", corpus.movies["movie"].tolist() == [20, 10, 30]),
        (
            "weighted ratings",
            np.allclose(
                corpus.movies["wr"].to_numpy(),
                [8.0, 7.9375, 7.138888888888889],
                rtol=0.0,
                atol=1e-12,
            ),
        ),
    ]
    positives = binarize(log, corpus)
    ordered = positives.sort_values(
        ["timestamp", "user", "movie"], kind="stable"
    ).reset_index(drop=True)
    golden = [
        (6, 20, 1, 15),
        (5, 30, 3, 40),
        (5, 10, 2, 45),
        (4, 20, 1, 50),
        (3, 30, 3, 90),
        (1, 10, 2, 100),
        (2, 30, 3, 120),
    ]
    got = [tuple(row) for row in ordered[["user", "movie", "rank", "timestamp"]].to_numpy()]
    checks.append(("binarized positives", got == golden))
    half = snapshot(positives, 0.5, corpus.n, corpus.m)
    pairs = list(zip(half.users.tolist(), half.ranks.tolist()))
    checks.append(("half-history prefix", pairs == [(6, 1), (5, 3), (5, 2)]))
    failed = [name for name, ok in checks if not ok]
    _report(
        7,
        not failed,
        "weighted ranking, binarization, and snapshot prefix match the "
        "hand-computed goldens on the committed 3-movie/6-user fixture"
        + (f"; failed: {failed}" if failed else ""),
    )


@pytest.fixture(scope="module")
def synthetic_prep(tmp_path_factory):
    """Prep pipeline over the simulator-generated synthetic corpus."""
    root = tmp_path_factory.mktemp("accept-synth")
    paths = synthetic_data.write_synthetic_corpus(root / "raw")
    prepdir = root / "prep"
    manifest = prep_pipeline(
        paths["ratings"],
        paths["movies"],
        paths["links"],
        paths["imdb"],
        prepdir,
        genre="Film-Noir",
        n=synthetic_data.N_MOVIES,
        target_users=synthetic_data.M_USERS,
        ratios=(0.0, 0.1, 0.5, 1.0),
        seed=0,
    )
    assert not manifest["popularity_quality_aligned"]
    return prepdir, manifest


@pytest.fixture(scope="module")
def synthetic_sweep(synthetic_prep, tmp_path_factory):
    """Ratio sweep (popularity vs pairwise+popularity) over synthetic snapshots."""
    prepdir, manifest = synthetic_prep
    outdir = tmp_path_factory.mktemp("accept-sweep")
    base = SimulationConfig(
        n=manifest["n"], m=manifest["m"], steps=50, seeds=200
    )
    snapshots = {
        float(r): prepdir / name for r, name in manifest["snapshots"].items()
    }
    table = sweep_ratios(
        base, snapshots, ("popularity", "pairwise+popularity"), outdir=outdir
    )
    return table, outdir


def _advantage_by_ratio(table):
    wide = table.pivot(index="ratio", columns="policy", values="fair_mean")
    return {
        float(r): float(wide.loc[r, "pairwise+popularity"] - wide.loc[r, "popularity"])
        for r in wide.index
    }


def test_criterion_8_trend_on_real_data(tmp_path):
    data_dir = os.environ.get("CCFAIR_MOVIELENS_DIR")
    if not data_dir:
        _skip(
            8,
            "real MovieLens data not available in this environment; set "
            "CCFAIR_MOVIELENS_DIR to a directory with ratings.csv, movies.csv, "
            "links.csv, title.ratings.tsv (the synthetic stand-in line below "
            "covers the same trend)",
        )
    data = Path(data_dir)
    manifest = prep_pipeline(
        data / "ratings.csv",
        data / "movies.csv",
        data / "links.csv",
        data / "title.ratings.tsv",
        tmp_path / "prep",
    )
    base = SimulationConfig(n=manifest["n"], m=manifest["m"], steps=300, seeds=200)
    snapshots = {
        float(r): tmp_path / "prep" / name
        for r, name in manifest["snapshots"].items()
    }
    table = sweep_ratios(
        base,
        snapshots,
        ("popularity", "pairwise+popularity"),
        workers=os.cpu_count() or 1,
    )
    adv = _advantage_by_ratio(table)
    ratios = sorted(adv)
    ok = adv[ratios[0]] > 0 and adv[ratios[-1]] <= 0
    _report(
        8,
        ok,
        f"pairwise+popularity fairness advantage {adv[ratios[0]]:+.4f} at "
        f"ratio {ratios[0]} and {adv[ratios[-1]]:+.4f} at ratio {ratios[-1]}",
    )


def test_criterion_8_standin_trend_on_synthetic_data(synthetic_sweep):
    table, _ = synthetic_sweep
    adv = _advantage_by_ratio(table)
    ok = adv[0.0] > 0 and adv[1.0] <= 0
    _report(
        "8 (synthetic stand-in)",
        ok,
        f"pairwise+popularity fairness advantage {adv[0.0]:+.4f} with no "
        f"history and {adv[1.0]:+.4f} with full history (simulator-generated "
        f"corpus, n=8, m=280, 200 seeds per cell)",
    )


def test_criterion_9_entrenched_state_is_irreversible():
    n, m = 3, 12
    init = {u: (1, 3) for u in range(1, m + 1)}
    entrenched = np.array([m, 0, m], dtype=np.int64)
    flags = fairness_vector(entrenched).per_creator
    checks = [("state is CC2-unfair", not flags[1])]
    policies = DESK_POLICIES + ("permutation",)
    for idx, name in enumerate(policies):
        state = new_platform(n, m, init=init)
        rng = np.random.Generator(np.random.Philox(900 + idx))
        policy = build_policy(name, n, m, rng=rng)
        steps = n if name == "permutation" else 1000
        moved = sum(
            apply_step(state, policy.recommend(state, rng)).count
            for _ in range(steps)
        )
        checks.append(
            (name, moved == 0 and np.array_equal(state.followers, entrenched))
        )
    state = new_platform(n, m, init=init)
    rng = np.random.Generator(np.random.Philox(999))
    moved = sum(
        apply_step(state, rng.integers(1, n + 1, size=m).astype(np.int32)).count
        for _ in range(1000)
    )
    checks.append(
        ("adversarial vectors", moved == 0 and np.array_equal(state.followers, entrenched))
    )
    failed = [name for name, ok in checks if not ok]
    _report(
        9,
        not failed,
        "all-follow-{CC1,CC3} state is CC2-unfair and unchanged by 1000 steps "
        "of every policy plus 1000 arbitrary recommendation vectors"
        + (f"; failed: {failed}" if failed else ""),
    )


# --- engineering -----------------------------------------------------------


def test_criterion_10_worker_count_invariance(tmp_path):
    config = SimulationConfig(
        n=10,
        m=180,
        policy="pairwise+popularity",
        p=0.9,
        steps=20,
        seeds=16,
        record_every=1,
    )
    blobs = {}
    for workers in (1, 8):
        outdir = tmp_path / f"workers-{workers}"
        run_experiment(config, workers=workers).write(outdir)
        blobs[workers] = tuple(
            (outdir / name).read_bytes() for name in ("creators.csv", "timesteps.csv")
        )
    _report(
        10,
        blobs[1] == blobs[8],
        "creators.csv and timesteps.csv byte-identical across 1-worker and "
        "8-worker runs (16 noisy pairwise+popularity seeds)",
    )


def test_criterion_11_throughput():
    n, m = 100, 49_500
    rng = np.random.Generator(np.random.Philox(4242))
    policy = build_policy("popularity", n, m)
    state = new_platform(n, m)
    for _ in range(50):
        apply_step(state, policy.recommend(state, rng))
    best = 0.0
    steps = 700
    for _ in range(3):
        state = new_platform(n, m)
        started = time.perf_counter()
        for _ in range(steps):
            apply_step(state, policy.recommend(state, rng))
        best = max(best, steps * m / (time.perf_counter() - started))
    _report(
        11,
        best >= 5e7,
        f"popularity policy sustains {best:.3g} user-steps/s at n=100, "
        f"m=49500 (floor 5e7, best of 3 runs)",
    )


# --- figures ---------------------------------------------------------------


@pytest.fixture(scope="module")
def figure_inputs(tmp_path_factory):
    """Harness outputs with the desk-scale shape (reduced to 100 seeds)."""
    root = tmp_path_factory.mktemp("accept-figs")
    for policy in DESK_POLICIES:
        config = SimulationConfig(
            n=20, m=1900, policy=policy, p=1.0, steps=300, seeds=100
        )
        output = run_experiment(config)
        outdir = root / policy.replace("+", "-")
        output.write(outdir)
        tercile_report(output.creators, config.n).to_csv(
            outdir / "terciles.csv", index=False
        )
    return root


def test_criterion_12_figures(figure_inputs, synthetic_sweep, tmp_path):
    try:
        from ccfigs import render, render_all
        from ccfigs.errors import InputDataError as FigureInputError
        from ccfigs.spec import FigureSpec
    except ImportError:
        _skip(12, "figures component (ccfigs) not installed; all earlier criteria run without it")
    _, sweep_dir = synthetic_sweep
    dirs = {policy: figure_inputs / policy.replace("+", "-") for policy in DESK_POLICIES}
    creators = {policy: str(dirs[policy] / "creators.csv") for policy in DESK_POLICIES}
    timesteps = {policy: str(dirs[policy] / "timesteps.csv") for policy in DESK_POLICIES}
    terciles = {policy: str(dirs[policy] / "terciles.csv") for policy in DESK_POLICIES}
    manifest = {
        "figures": [
            {
                "kind": "fairness-by-rank",
                "out": "fairness_by_rank.png",
                "inputs": {"creators": creators},
            },
            {
                "kind": "fairness-over-time",
                "out": "fairness_over_time.png",
                "inputs": {"creators": creators},
            },
            {
                "kind": "dissatisfaction",
                "out": "dissatisfaction.png",
                "inputs": {"timesteps": timesteps},
            },
            {
                "kind": "ratio-sweep",
                "out": "ratio_sweep.png",
                "inputs": {"sweep": str(sweep_dir / "sweep.csv")},
            },
            {
                "kind": "tercile-bars",
                "out": "tercile_bars.png",
                "inputs": {"terciles": terciles},
            },
            {
                "kind": "fairness-by-rank-grid",
                "out": "fairness_by_rank_grid.png",
                "inputs": {
                    "panels": {
                        "bare": {
                            policy: creators[policy] for policy in BARE
                        },
                        "pairwise": {
                            policy: creators[policy] for policy in PAIRWISE
                        },
                    }
                },
            },
        ]
    }
    manifest_path = tmp_path / "figures.json"
    manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
    outdir = tmp_path / "out"
    summary = render_all(manifest_path, outdir)
    rendered = sorted(p.name for p in summary.written)
    expected = sorted(spec["out"] for spec in manifest["figures"])
    all_ok = not summary.failures and rendered == expected and all(
        (outdir / name).stat().st_size > 0 for name in expected
    )

    import pandas as pd

    broken = pd.read_csv(dirs["random"] / "creators.csv").drop(columns=["cc_fair"])
    broken_path = tmp_path / "broken.csv"
    broken.to_csv(broken_path, index=False)
    bad_spec = FigureSpec.from_dict(
        {
            "kind": "fairness-by-rank",
            "out": "broken.png",
            "inputs": {"creators": {"random": str(broken_path)}},
        }
    )
    with pytest.raises(FigureInputError, match="cc_fair"):
        render(bad_spec, tmp_path)

    empty_path = tmp_path / "empty.csv"
    empty_path.write_text("seed,t,creator_rank,followers,cc_fair\n", encoding="utf-8")
    empty_spec = FigureSpec.from_dict(
        {
            "kind": "fairness-by-rank",
            "out": "empty.png",
            "inputs": {"creators": {"random": str(empty_path)}},
        }
    )
    with pytest.raises(FigureInputError, match="no data"):
        render(empty_spec, tmp_path)

    _report(
        12,
        all_ok,
        f"render_all produced all {len(expected)} figure kinds from harness "
        f"CSVs; a missing cc_fair column and an empty table raise input "
        f"errors naming the problem",
    )
