"""Command line entry point: ``qsketch {bench,fit,memory,e2e}``."""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import apps, bench
from .datagen import make_rng

EXPONENT_TOL = 0.05
RMS_LIMIT = 0.05

E2E_DEFAULTS = {
    "linsys": {"N": 8, "s": 4, "kappa": 4.0, "eps": 0.1, "delta": 0.1},
    "svm": {"D": 8, "m_tests": 4, "gamma_test": 0.3, "kappa": 4.0, "delta": 0.1},
    "pca": {"N": 8, "s": 4, "m_tests": 4, "eps": 0.1, "delta": 0.1},
}


def _fit_checks(fit: bench.FitResult, kind: str | None) -> list[str]:
    """Threshold violations: unit M exponent always; boolean also unit N exponent and the RMS limit."""
    bad = []
    if "m_samples" in fit.exponents and abs(fit.exponents["m_samples"] + 1) > EXPONENT_TOL:
        bad.append(f"M exponent {fit.exponents['m_samples']:.4f} outside -1 +- {EXPONENT_TOL}")
    if kind == "boolean":
        if abs(fit.exponents.get("dim", 1.0) - 1) > EXPONENT_TOL:
            bad.append(f"N exponent {fit.exponents['dim']:.4f} outside 1 +- {EXPONENT_TOL}")
        if fit.rms_rel_err > RMS_LIMIT:
            bad.append(f"RMS relative error {fit.rms_rel_err:.4f} above {RMS_LIMIT}")
    return bad


def _print_fit(fit: bench.FitResult) -> None:
    exps = ", ".join(f"{k}={v:.4f}" for k, v in fit.exponents.items())
    print(f"exponents: {exps}; constant={fit.constant:.4g}; rms_rel_err={fit.rms_rel_err:.4f}; "
          f"points={fit.n_points} (dropped zero: {fit.dropped_zero})")


def _default_model(kind: str) -> str:
    return "nnz,M" if kind == "matrix_element" else "N,M"


def cmd_bench(args) -> int:
    if args.grid:
        with open(args.grid) as fh:
            grid = bench.BenchmarkGrid.from_json(fh.read())
    elif args.full_scale:
        print("warning: full-scale grid, expect hours of wall clock", file=sys.stderr)
        grid = bench.BenchmarkGrid.full_scale(args.kind, args.seed)
    else:
        grid = bench.BenchmarkGrid.desk(args.kind, args.seed, args.mode)
    if grid.kind != args.kind:
        raise SystemExit(f"grid file is for kind {grid.kind!r}, not {args.kind!r}")
    try:
        rows = bench.run_benchmark(grid, workers=args.workers)
    except bench.GridTooExpensive as e:
        print(f"rejected: {e}", file=sys.stderr)
        return 2
    bench.write_csv(rows, args.out or sys.stdout)
    fit = bench.fit_loglog(rows, _default_model(grid.kind))
    if args.out:
        _print_fit(fit)
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(bench.render_svg(rows, fit))
    bad = _fit_checks(fit, grid.kind)
    for b in bad:
        print(f"FAIL {b}", file=sys.stderr)
    return 1 if args.assert_ and bad else 0


def cmd_fit(args) -> int:
    rows = bench.read_csv(args.inp)
    fit = bench.fit_loglog(rows, args.model)
    _print_fit(fit)
    kinds = {r["kind"] for r in rows}
    bad = _fit_checks(fit, kinds.pop() if len(kinds) == 1 else None)
    for b in bad:
        print(f"FAIL {b}", file=sys.stderr)
    return 1 if args.assert_ and bad else 0


def cmd_memory(args) -> int:
    print(bench.memory_calc(args.task, args.n, args.d, args.s))
    return 0


def run_e2e(task: str, config: dict, seeds: int) -> dict:
    """Run one pipeline over ``seeds`` random certified instances; returns the failure summary."""
    cfg = {**E2E_DEFAULTS[task], **config}
    delta = cfg["delta"]
    failures = 0
    for seed in range(seeds):
        rng = make_rng(seed, 7)
        if task == "linsys":
            t = apps.random_linear_system_task(cfg["N"], cfg["s"], cfg["kappa"], rng)
            res = apps.estimate_quadratic_form(t, cfg["eps"], delta, rng, seed=seed)
        elif task == "svm":
            t = apps.random_classification_task(cfg["D"], cfg["m_tests"], cfg["gamma_test"], cfg["kappa"], rng)
            res = apps.classify(t, delta, rng, seed=seed)
        else:
            t = apps.random_reduction_task(cfg["N"], cfg["s"], cfg["m_tests"], rng)
            res = apps.reduce_dimension(t, cfg["eps"], delta, rng)
        failures += not res.ok
    rate = failures / seeds
    limit = delta + 2 * math.sqrt(delta * (1 - delta) / seeds)
    return {"task": task, "seeds": seeds, "failures": failures, "rate": rate, "limit": limit,
            "ok": rate <= limit}


def cmd_e2e(args) -> int:
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    out = run_e2e(args.task, config, args.seeds)
    print(json.dumps(out))
    return 1 if args.assert_ and not out["ok"] else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsketch", description="Oracle sketching benchmarks and pipelines")
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bench", help="run a benchmark grid and write CSV")
    b.add_argument("--kind", choices=bench.KINDS, required=True)
    b.add_argument("--grid", help="JSON grid file (defaults to the desk grid)")
    b.add_argument("--mode", choices=("expected", "sampled"), default="expected")
    b.add_argument("--out", help="CSV path (stdout if omitted)")
    b.add_argument("--svg", help="optional SVG plot path")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--full-scale", action="store_true")
    b.add_argument("--assert", dest="assert_", action="store_true")
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("fit", help="log-log fit of a benchmark CSV")
    f.add_argument("--in", dest="inp", required=True)
    f.add_argument("--model", default="N,M")
    f.add_argument("--assert", dest="assert_", action="store_true")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("memory", help="qubit count of the sketched pipeline")
    m.add_argument("--task", choices=("lssvm", "pca"), required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--d", type=int, required=True)
    m.add_argument("--s", type=int, required=True)
    m.add_argument("--assert", dest="assert_", action="store_true")
    m.set_defaults(func=cmd_memory)

    e = sub.add_parser("e2e", help="end-to-end pipeline over random seeds")
    e.add_argument("task", choices=("linsys", "svm", "pca"))
    e.add_argument("--config", help="JSON overrides of the instance parameters")
    e.add_argument("--seeds", type=int, default=50)
    e.add_argument("--assert", dest="assert_", action="store_true")
    e.set_defaults(func=cmd_e2e)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
