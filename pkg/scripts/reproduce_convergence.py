#!/usr/bin/env python3
"""Regenerate the convergence studies of both examples as CSV files.

    python3 scripts/reproduce_convergence.py --studies ex1-weighted ex1-post --out-dir results
    python3 scripts/reproduce_convergence.py --studies ex2-weighted --quick

``--quick`` drops the finest level of every block, which keeps the 2D studies to a few minutes.
"""

from __future__ import annotations

import argparse
import logging
import time
from pathlib import Path

from evodg.study import StudyConfig, run_study

EX1 = (192, 384, 768)
EX2 = (16, 32, 64)
SUP = ("sup_V", "sup_Vpp", "sup_EVpp", "sup_Upp")


def _post(example, rho, levels, norms=()):
    return [(f"{k}-{k - 2}", dict(example=example, variant="transformed", rho=(rho,), k=k, q=k - 2, levels=levels,
                                  postprocess=True, norms=norms)) for k in (3, 4)]


# study -> list of (block label, StudyConfig keyword arguments)
STUDIES = {
    "ex1-weighted": [(f"{k}-{k - 1}", dict(example=1, variant="weighted", rho=(1.0, 2.0), k=k, levels=lv))
                     for k, lv in ((1, EX1), (2, EX1), (3, (96,) + EX1))],
    "ex1-transformed": [(f"{k}-{k - 1}", dict(example=1, variant="transformed", rho=(2.0,), k=k, levels=EX1))
                        for k in (1, 2, 3)],
    "ex1-post": _post(1, 2.0, EX1),
    "ex1-post-sup": _post(1, 2.0, EX1, SUP),
    "ex2-weighted": [(f"{k}-{k - 1}", dict(example=2, variant="weighted", rho=(1.0, 2.0), k=k, levels=lv))
                     for k, lv in ((1, EX2), (2, (32, 64, 128)), (3, EX2))],
    "ex2-transformed": [(f"{k}-{k - 1}", dict(example=2, variant="transformed", rho=(1.0,), k=k, levels=EX2))
                        for k in (1, 2, 3)],
    "ex2-post": _post(2, 1.0, EX2),
    "ex2-post-sup": _post(2, 1.0, EX2, SUP),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--studies", nargs="+", default=list(STUDIES), choices=list(STUDIES))
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--quick", action="store_true", help="skip the finest level of each block")
    ap.add_argument("--workers", type=int, default=1, help="levels solved in parallel")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.studies:
        for label, kw in STUDIES[name]:
            if args.quick:
                kw = {**kw, "levels": kw["levels"][:-1]}
            path = out / f"{name}_{label}.csv"
            start = time.perf_counter()
            report = run_study(StudyConfig(**kw, workers=args.workers, out=str(path)))
            logging.info("%s block %s -> %s (%.0f s)", name, label, path, time.perf_counter() - start)
            print(report.to_csv())


if __name__ == "__main__":
    main()
