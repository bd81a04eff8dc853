"""Command-line entry point.

Subcommands: enumerate, tables, peel, build-map, continuum, validate, bridge.
All outputs are reproducible from (flags, seed); the seed defaults to a fixed
value, overridable by --seed or the HYPERPLANE_SEED environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import mpmath as mp
import numpy as np

DEFAULT_SEED = 20260809


def _seed_default() -> int:
    env = os.environ.get("HYPERPLANE_SEED")
    return int(env) if env else DEFAULT_SEED


def _outdir(args) -> Path:
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SystemExit(f"cannot create output directory {out}: {exc}")
    if not os.access(out, os.W_OK):
        raise SystemExit(f"output directory {out} is not writable")
    return out


def _tables_from_args(args, p_max=256):
    from hyperplane.combinatorics import BoltzmannTables, LambdaParams

    if getattr(args, "n", None) is not None and getattr(args, "lambda_ratio", None) is not None:
        raise SystemExit("give exactly one of --lambda-ratio and --n")
    if getattr(args, "n", None) is not None:
        params = LambdaParams.near_critical(args.n)
    else:
        ratio = args.lambda_ratio if args.lambda_ratio is not None else "1"
        params = LambdaParams.from_ratio(ratio)
    return BoltzmannTables(params, p_max=p_max)


def cmd_enumerate(args) -> int:
    from hyperplane.combinatorics import count_triangulations
    from hyperplane.errors import ConventionHoleError

    out = _outdir(args)
    path = out / "counts.csv"
    with open(path, "w") as fh:
        fh.write("n,p,count\n")
        for p in range(1, args.pmax + 1):
            for n in range(0, args.nmax + 1):
                try:
                    c = count_triangulations(n, p)
                except ConventionHoleError:
                    c = 0
                fh.write(f"{n},{p},{c}\n")
    print(f"wrote {path}")
    return 0


def cmd_tables(args) -> int:
    tables = _tables_from_args(args, p_max=args.pmax)
    out = _outdir(args)
    path = out / "boltzmann_tables.json"
    path.write_text(tables.to_json())
    print(f"wrote {path}")
    return 0


def _one_trace(payload):
    seed, replica, ratio, n, rmax = payload
    from hyperplane.combinatorics import BoltzmannTables, LambdaParams
    from hyperplane.peeling import PeelEngine
    from hyperplane.rngstreams import RunStreams

    params = (LambdaParams.near_critical(n) if n is not None
              else LambdaParams.from_ratio(ratio))
    engine = PeelEngine(BoltzmannTables(params, p_max=256))
    trace = engine.run(rmax, RunStreams(seed, replica))
    return replica, trace


def cmd_peel(args) -> int:
    from hyperplane.peeling import PeelEngine
    from hyperplane.rngstreams import RunStreams

    out = _outdir(args)
    seed = args.seed
    meta = {
        "seed": seed,
        "replicas": args.replicas,
        "r_max": args.rmax,
        "lambda_ratio": args.lambda_ratio,
        "n": args.n,
    }
    tables = _tables_from_args(args)
    meta["lambda"] = mp.nstr(tables.params.lam, 17)
    meta["h"] = mp.nstr(tables.params.h, 17)
    if args.threads > 1:
        payloads = [(seed, k, args.lambda_ratio, args.n, args.rmax)
                    for k in range(args.replicas)]
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = dict(pool.map(_one_trace, payloads))
        traces = [results[k] for k in range(args.replicas)]
    else:
        engine = PeelEngine(tables)
        traces = [engine.run(args.rmax, RunStreams(seed, k)) for k in range(args.replicas)]
    for k, trace in enumerate(traces):
        trace.to_csv(out / f"trace_{k:04d}.csv")
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    print(f"wrote {args.replicas} traces to {out}")
    return 0


def cmd_build_map(args) -> int:
    from hyperplane.mapbuild import build_pshit_ball, check_hull_against_trace

    out = _outdir(args)
    tables = _tables_from_args(args)
    failures = 0
    for k in range(args.replicas):
        build = build_pshit_ball(tables, args.rmax, rng=args.seed, replica=k)
        ok = check_hull_against_trace(build)
        failures += 0 if ok else 1
        (out / f"map_{k:04d}.txt").write_text(build.map.to_text())
        build.trace.to_csv(out / f"map_trace_{k:04d}.csv")
    (out / "meta.json").write_text(json.dumps({
        "seed": args.seed, "replicas": args.replicas, "r_max": args.rmax,
        "lambda_ratio": args.lambda_ratio, "n": args.n,
        "oracle_failures": failures,
    }, indent=1, sort_keys=True))
    print(f"wrote {args.replicas} maps to {out}; oracle failures: {failures}")
    return 0 if failures == 0 else 1


def cmd_continuum(args) -> int:
    from hyperplane.continuum import joint_transform
    from hyperplane.levypaths import simulate_PV, simulate_backward_levy
    from hyperplane.rngstreams import RunStreams

    out = _outdir(args)
    streams = RunStreams(args.seed, 0)

    path = simulate_backward_levy(args.horizon, args.eps_cut, streams.extra(1))
    path.to_csv(out / "levy_path.csv")

    rescaled = []
    rng = streams.extra(2)
    for k in range(args.replicas):
        pv = simulate_PV(args.horizon, None, args.eps_cut, rng)
        rescaled.append((pv.P.terminal, pv.V.terminal))
    with open(out / "pv_terminals.csv", "w") as fh:
        fh.write("P_T,V_T\n")
        for p, v in rescaled:
            fh.write(f"{p:.12g},{v:.12g}\n")

    with open(out / "transform_table.csv", "w") as fh:
        fh.write("r,lambda,mu,transform_value\n")
        for r in (0.25, 0.5, 1.0, 2.0, 4.0):
            for lam in (0.0, 0.5, 1.0, 2.0):
                for mu in (0.0, 0.5, 1.0):
                    try:
                        val = joint_transform(lam, mu, r)
                    except Exception:
                        continue
                    fh.write(f"{r},{lam},{mu},{val:.12g}\n")
    (out / "meta.json").write_text(json.dumps({
        "seed": args.seed, "replicas": args.replicas,
        "horizon": args.horizon, "eps_cut": args.eps_cut,
    }, indent=1, sort_keys=True))
    print(f"wrote continuum outputs to {out}")
    return 0


def cmd_validate(args) -> int:
    from hyperplane.harness import quick_validation_reports, write_reports

    out = _outdir(args)
    reports = quick_validation_reports()
    if not args.quick:
        reports.extend(_mc_validation_reports(args))
    code = write_reports(reports, out / "validation_reports.json")
    for rep in reports:
        status = "pass" if rep.passed else "FAIL"
        print(f"[{status}] {rep.name}: statistic={rep.statistic:.3e} threshold={rep.threshold:.3e}")
    return code


def _mc_validation_reports(args):
    import numpy as np

    from hyperplane.combinatorics import BoltzmannTables, LambdaParams
    from hyperplane.harness import TestReport, ks_exponential_test
    from hyperplane.levypaths import martingale_check, simulate_PV
    from hyperplane.rngstreams import RunStreams

    streams = RunStreams(args.seed, 0)
    reports = []

    est, err = martingale_check(1.0, 100_000, 1e-4, streams.extra(3))
    reports.append(TestReport("martingale_mean", abs(est - 1.0), 3 * err,
                              abs(est - 1.0) <= 3 * err,
                              config={"estimate": est, "stderr": err}))

    rng = streams.extra(4)
    n_paths = args.replicas
    term_p = np.empty(n_paths)
    term_v = np.empty(n_paths)
    for k in range(n_paths):
        pv = simulate_PV(4.0, None, 1e-2, rng)
        term_p[k] = pv.P.terminal
        term_v[k] = pv.V.terminal
    rescaled = term_p * np.exp(-2 * np.sqrt(2) * 4.0)
    rep = ks_exponential_test(rescaled, 12.0, name="rescaled_perimeter_ks")
    reports.append(rep)
    mean_err = abs(rescaled.mean() - 1 / 12.0) / (1 / 12.0)
    reports.append(TestReport("rescaled_perimeter_mean", mean_err, 0.05, mean_err <= 0.05))
    ratio = (term_v / term_p).mean()
    reports.append(TestReport("volume_perimeter_ratio", abs(ratio - 0.25), 0.0125,
                              abs(ratio - 0.25) <= 0.0125, config={"mean": float(ratio)}))
    return reports


def cmd_bridge(args) -> int:
    from hyperplane.harness import bridge_experiment, write_reports

    out = _outdir(args)
    n_list = [int(x) for x in args.n_list.split(",")]
    result = bridge_experiment(n_list, args.r, args.replicas, args.seed)
    with open(out / "bridge_discrepancies.csv", "w") as fh:
        fh.write("n,perimeter_discrepancy,perimeter_stderr,volume_discrepancy,volume_stderr\n")
        for k, n in enumerate(result.n_list):
            fh.write(
                f"{n},{result.perimeter_discrepancy[k]:.8g},{result.perimeter_stderr[k]:.8g},"
                f"{result.volume_discrepancy[k]:.8g},{result.volume_stderr[k]:.8g}\n"
            )
    code = write_reports([result.report], out / "bridge_report.json")
    print(f"bridge discrepancies: {result.perimeter_discrepancy}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperplane",
        description="Peeling samplers and continuum checks for Markovian hyperbolic triangulations",
    )
    parser.add_argument("--seed", type=int, default=_seed_default(),
                        help="run seed (fallback: HYPERPLANE_SEED, then a fixed default)")
    parser.add_argument("--output", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="replica parallelism; results are independent of it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="exact triangulation counts")
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("--pmax", type=int, default=12)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("tables", help="build and dump Boltzmann tables")
    p.add_argument("--lambda-ratio", dest="lambda_ratio", default=None)
    p.add_argument("--n", type=int, default=None, help="near-critical size parameter")
    p.add_argument("--pmax", type=int, default=64)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("peel", help="hull traces from peeling runs")
    p.add_argument("--lambda-ratio", dest="lambda_ratio", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rmax", type=int, required=True)
    p.add_argument("--replicas", type=int, default=1)
    p.set_defaults(func=cmd_peel)

    p = sub.add_parser("build-map", help="materialize peeling runs as maps")
    p.add_argument("--lambda-ratio", dest="lambda_ratio", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rmax", type=int, required=True)
    p.add_argument("--replicas", type=int, default=1)
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("continuum", help="continuum path and transform tables")
    p.add_argument("--horizon", type=float, default=4.0)
    p.add_argument("--eps-cut", dest="eps_cut", type=float, default=1e-2)
    p.add_argument("--replicas", type=int, default=200)
    p.set_defaults(func=cmd_continuum)

    p = sub.add_parser("validate", help="invariant suite with JSON reports")
    p.add_argument("--quick", action="store_true", help="deterministic checks only")
    p.add_argument("--replicas", type=int, default=2000,
                   help="Monte Carlo paths for the full suite")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bridge", help="near-critical bridge experiment")
    p.add_argument("--n", dest="n_list", default="8,15,25",
                   help="comma-separated size parameters")
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--replicas", type=int, default=2000)
    p.set_defaults(func=cmd_bridge)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
