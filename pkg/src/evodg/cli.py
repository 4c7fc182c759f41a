"""Command line entry point: ``evodg {study,quadrature,energy,dump-solution}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from .evolution import TimeMesh, dump_solution, march
from .problems import EXAMPLES, build_discrete_problem
from .space.mesh import RECT_PATTERNS
from .quadrature import MAX_DEGREE, MAX_SIGMA, build_weighted_radau
from .study import (
    StudyConfig,
    StudyConfigError,
    is_monotone_decreasing,
    load_config,
    make_spec,
    run_energy_audit,
    run_study,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with a [study] section; flags override it")
    p.add_argument("--example", type=int, choices=sorted(EXAMPLES))
    p.add_argument("--variant", choices=["weighted", "transformed"])
    p.add_argument("--rho", type=float, nargs="+")
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--levels", type=int, nargs="+")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--mesh-pattern", dest="mesh_pattern", choices=list(RECT_PATTERNS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evodg", description="space-time dG experiments for evolutionary equations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="convergence table over mesh levels")
    _add_common(st)
    st.add_argument("--postprocess", action="store_true", default=None)
    st.add_argument("--norms", nargs="+")
    st.add_argument("--time-samples", dest="time_samples", type=int)
    st.add_argument("--workers", type=int)

    qd = sub.add_parser("quadrature", help="print a weighted right Radau rule")
    qd.add_argument("--q", type=int, required=True)
    qd.add_argument("--sigma", type=float, default=0.0)
    fmt = qd.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")

    en = sub.add_parser("energy", help="audit the discrete energy identity")
    _add_common(en)
    en.add_argument("--zero-load", action="store_true", help="drop the load and start from U(T)")

    dp = sub.add_parser("dump-solution", help="write nodal values of one run as CSV")
    _add_common(dp)
    return parser


def _config(args, parser) -> StudyConfig:
    try:
        base = load_config(args.config) if args.config else None
        overrides = {}
        for key in ("example", "variant", "rho", "k", "q", "levels", "out", "seed", "mesh_pattern",
                    "postprocess", "norms", "time_samples", "workers"):
            val = getattr(args, key, None)
            if val is not None:
                overrides[key] = tuple(val) if isinstance(val, list) else val
        if "k" in overrides and "q" not in overrides:
            overrides["q"] = None  # q = k - 1
        return StudyConfig(**{**(base.__dict__ if base else {}), **overrides})
    except (StudyConfigError, OSError) as exc:
        parser.error(str(exc))


def _cmd_quadrature(args, parser) -> int:
    if not 0 <= args.q <= MAX_DEGREE:
        parser.error(f"--q must be in 0..{MAX_DEGREE}")
    if not 0 <= args.sigma <= MAX_SIGMA:
        parser.error(f"--sigma must be in [0, {MAX_SIGMA}]")
    rule = build_weighted_radau(args.q, args.sigma)
    if args.json:
        print(json.dumps({"q": args.q, "sigma": args.sigma, "nodes": rule.nodes.tolist(), "weights": rule.weights.tolist()}))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if args.csv:
            w.writerow(["i", "node", "weight"])
        for i, (s, wt) in enumerate(zip(rule.nodes, rule.weights)):
            w.writerow([i, repr(float(s)), repr(float(wt))])
        sys.stdout.write(buf.getvalue())
    return 0


def _cmd_study(args, parser) -> int:
    cfg = _config(args, parser)
    try:
        report = run_study(cfg)
    except StudyConfigError as exc:
        parser.error(str(exc))
    text = report.to_csv()
    if not cfg.out:
        sys.stdout.write(text)
    for n, msg in report.failures.items():
        print(f"level N={n} failed: {msg}", file=sys.stderr)
    return 1 if len(report.failures) == len(cfg.levels) else 0


def _cmd_energy(args, parser) -> int:
    cfg = _config(args, parser)
    try:
        rep = run_energy_audit(cfg, zero_load=args.zero_load)
    except ValueError as exc:
        parser.error(str(exc))
    text = rep.to_csv(cfg.out, header=cfg.header())
    if not cfg.out:
        sys.stdout.write(text)
    if args.zero_load:
        ok = all(is_monotone_decreasing(e) for e in rep.energies)
        print(f"# monotone weighted energy: {ok}")
    return 0


def _cmd_dump(args, parser) -> int:
    cfg = _config(args, parser)
    if not cfg.out:
        parser.error("dump-solution needs --out")
    N = cfg.levels[0]
    try:
        problem = build_discrete_problem(make_spec(cfg), N, cfg.k)
    except ValueError as exc:
        parser.error(str(exc))
    sol = march(problem, TimeMesh.uniform(cfg.T, N), cfg.q, cfg.rho[0], cfg.variant)
    dump_solution(sol, cfg.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"study": _cmd_study, "quadrature": _cmd_quadrature, "energy": _cmd_energy, "dump-solution": _cmd_dump}
    return handlers[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
