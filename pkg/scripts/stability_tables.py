"""Stability ratios and log-stability products for the three reference scenarios.

usage: python scripts/stability_tables.py [--n 201] [--nt 400] [--out results/]
"""

import argparse
from pathlib import Path

from carleman_lab.grid import SpatialGrid, TimeGrid
from carleman_lab.scenario import assumption_scenario
from carleman_lab.stability_b import StabilityReport, stability_experiment
from carleman_lab.stability_ic import (ICStabilityRecord, ic_stability_experiment, gronwall_check,
                                       sine_family)

EPS = (1e-3, 1e-2, 1e-1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=201)
    ap.add_argument("--nt", type=int, default=400)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sg, tg = SpatialGrid(1.0, args.n), TimeGrid(0.0, 1.0, args.nt)

    for v in (0, 1, 2):
        reports = stability_experiment(assumption_scenario(1.0, v), EPS, sg, tg)
        (out / f"stab_b_variant{v}.csv").write_text(
            "\n".join([StabilityReport.CSV_HEADER] + [r.csv_row() for r in reports]) + "\n")
        records = ic_stability_experiment(assumption_scenario(0.0, v), sine_family(EPS), sg, tg)
        (out / f"stab_ic_variant{v}.csv").write_text(
            "\n".join([ICStabilityRecord.CSV_HEADER] + [r.csv_row() for r in records]) + "\n")
        gron = gronwall_check(assumption_scenario(0.1, v).materialize(sg, tg)).constant
        ratios = ", ".join(f"{r.ratio:.4g}" for r in reports)
        products = ", ".join(f"{r.product:.4g}" for r in records)
        print(f"variant {v}: ratios [{ratios}]  products [{products}]  gronwall {gron:.4g}")


if __name__ == "__main__":
    main()
