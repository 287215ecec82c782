"""Command-line entry points.

Subcommands: ``simulate`` (one seeded run), ``experiment`` (multi-seed,
aggregated), ``sweep`` (snapshot-ratio x policy grid), ``prep``
(MovieLens pipeline), ``theory`` (closed-form bound + validators).

Run parameters come from ``--config <file>`` (a JSON object with
SimulationConfig keys) and/or individual flags; flags win. Exit codes:
0 success, 2 configuration error, 3 input/data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InputDataError, InvalidSignalError
from .harness import (
    SimulationConfig,
    run_experiment,
    run_simulation,
    simulation_frames,
    sweep_ratios,
    tercile_report,
)
from .movielens import prep_pipeline
from .policies import POLICY_NAMES
from .theory import (
    min_group_size,
    sample_fair_state,
    validate_fair_maintenance,
    validate_pairwise_noise,
)

_OVERRIDE_KEYS = (
    "policy", "n", "m", "p", "steps", "seeds",
    "master_seed", "record_every", "init_snapshot",
)


def _record_every(text: str):
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f'expected "auto" or an integer, got {text!r}'
        ) from None


def _add_config_args(sp: argparse.ArgumentParser):
    sp.add_argument("--config", help="JSON config file with SimulationConfig keys")
    sp.add_argument("--policy", choices=POLICY_NAMES)
    sp.add_argument("--n", type=int, help="number of creators")
    sp.add_argument("--m", type=int, help="number of users")
    sp.add_argument("--p", type=float, help="signal strength in [0,1]")
    sp.add_argument("--steps", type=int, help="simulation horizon T")
    sp.add_argument("--seeds", type=int, help="number of seeded runs")
    sp.add_argument("--master-seed", type=int, dest="master_seed")
    sp.add_argument("--record-every", type=_record_every, dest="record_every",
                    help='metric stride, or "auto" (dense to t=100, then every 10)')
    sp.add_argument("--init-snapshot", dest="init_snapshot",
                    help="snapshot file to start from instead of an empty platform")
    sp.add_argument("--early-stop", action="store_true", default=None,
                    help="stop a p=1 run once the state is absorbing")
    sp.add_argument("--lenient-groups", action="store_true", default=None,
                    help="allow m not divisible by n(n-1) for pairwise policies")


def _build_config(args, defaults=None) -> SimulationConfig:
    data = dict(defaults or {})
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigurationError(f"missing config file: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: bad JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        data.update(loaded)
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.early_stop is not None:
        data["early_stop"] = True
    if getattr(args, "lenient_groups", None):
        data["strict_groups"] = False
    for required in ("n", "m"):
        if required not in data:
            raise ConfigurationError(
                f"--{required} (or a config file providing it) is required"
            )
    return SimulationConfig.from_dict(data)


def _emit_json(payload: dict, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    config = _build_config(args)
    result = run_simulation(config, args.seed)
    creators, timesteps = simulation_frames(result, config.n)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        creators.to_csv(outdir / "creators.csv", index=False)
        timesteps.to_csv(outdir / "timesteps.csv", index=False)
    else:
        timesteps.to_csv(sys.stdout, index=False)
    return 0


def _cmd_experiment(args) -> int:
    config = _build_config(args)
    output = run_experiment(config, workers=args.workers)
    if args.out:
        output.write(args.out)
        if args.terciles:
            tercile_report(output.creators, config.n).to_csv(
                Path(args.out) / "terciles.csv", index=False
            )
    else:
        _emit_json(output.report, None)
    return 0


def _cmd_sweep(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise InputDataError(f"missing manifest file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    available = {
        float(ratio): str(manifest_path.parent / name)
        for ratio, name in manifest.get("snapshots", {}).items()
    }
    if args.ratios:
        wanted = [float(r) for r in args.ratios.split(",")]
        missing = [r for r in wanted if r not in available]
        if missing:
            raise InputDataError(
                f"manifest has no snapshot for ratio(s): "
                f"{', '.join(str(r) for r in missing)}"
            )
        available = {r: available[r] for r in wanted}
    if not available:
        raise InputDataError(f"{manifest_path}: no snapshots listed")
    defaults = {k: manifest[k] for k in ("n", "m") if k in manifest}
    base = _build_config(args, defaults=defaults)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    table = sweep_ratios(
        base, available, policies, workers=args.workers, outdir=args.out
    )
    if not args.out:
        table.to_csv(sys.stdout, index=False)
    return 0


def _cmd_prep(args) -> int:
    ratios = tuple(float(r) for r in args.ratios.split(","))
    manifest = prep_pipeline(
        args.ratings, args.movies, args.links, args.imdb, args.out,
        genre=args.genre, n=args.n, target_users=args.target_users,
        ratios=ratios, seed=args.seed,
    )
    sys.stdout.write(
        f"corpus: n={manifest['n']} movies, m={manifest['m']} users; "
        f"{len(manifest['snapshots'])} snapshot(s) in {args.out}\n"
    )
    return 0


def _cmd_theory(args) -> int:
    if args.theory_cmd == "bound":
        _emit_json({"p": args.p, "min_group_size": min_group_size(args.p)}, args.out)
        return 0
    rng = np.random.Generator(np.random.Philox(args.seed))
    if args.validator == "pairwise":
        k = args.k if args.k is not None else min_group_size(args.p)
        report = validate_pairwise_noise(args.p, k, args.trials, rng)
    else:
        report = validate_fair_maintenance(
            args.n, args.m,
            lambda r: sample_fair_state(args.n, args.m, r),
            args.trials, rng,
        )
    _emit_json(report.to_dict(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccfair",
        description="Simulate creator-follower dynamics under recommendation "
        "policies and measure individual fairness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one seeded simulation")
    _add_config_args(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output directory (default: CSV to stdout)")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("experiment", help="run all seeds and aggregate")
    _add_config_args(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="output directory (default: report to stdout)")
    sp.add_argument("--terciles", action="store_true",
                    help="also write terciles.csv (needs --out)")
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("sweep", help="experiment grid over snapshot ratios x policies")
    _add_config_args(sp)
    sp.add_argument("--manifest", required=True,
                    help="manifest.json written by `ccfair prep`")
    sp.add_argument("--ratios", help="comma-separated subset of manifest ratios")
    sp.add_argument(
        "--policies",
        default="random,popularity,pairwise+random,pairwise+popularity",
        help="comma-separated policy names",
    )
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="output directory (default: CSV to stdout)")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("prep", help="build snapshots from MovieLens + IMDb files")
    sp.add_argument("--ratings", required=True, help="ratings.csv")
    sp.add_argument("--movies", required=True, help="movies.csv")
    sp.add_argument("--links", required=True, help="links.csv")
    sp.add_argument("--imdb", required=True, help="IMDb title.ratings TSV")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--genre", default="Film-Noir")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--target-users", type=int, default=49500, dest="target_users")
    sp.add_argument("--ratios", default="0,0.02,0.0532,0.0892,0.12")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_prep)

    sp = sub.add_parser("theory", help="closed-form bound and validators")
    tsub = sp.add_subparsers(dest="theory_cmd", required=True)

    tb = tsub.add_parser("bound", help="minimum pairwise group size for a given p")
    tb.add_argument("--p", type=float, required=True)
    tb.add_argument("--out")
    tb.set_defaults(func=_cmd_theory)

    tv = tsub.add_parser("validate", help="Monte Carlo validators")
    vsub = tv.add_subparsers(dest="validator", required=True)

    vp = vsub.add_parser("pairwise", help="two-creator comparison under noise")
    vp.add_argument("--p", type=float, required=True)
    vp.add_argument("--k", type=int, help="group size (default: min_group_size(p))")
    vp.add_argument("--trials", type=int, default=100_000)
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--out")
    vp.set_defaults(func=_cmd_theory)

    vm = vsub.add_parser("maintenance", help="fairness after one popularity step")
    vm.add_argument("--n", type=int, default=3)
    vm.add_argument("--m", type=int, default=30)
    vm.add_argument("--trials", type=int, default=10_000)
    vm.add_argument("--seed", type=int, default=0)
    vm.add_argument("--out")
    vm.set_defaults(func=_cmd_theory)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InvalidSignalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
