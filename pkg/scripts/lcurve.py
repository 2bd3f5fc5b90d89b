"""Tikhonov sweep for the coefficient fit: reconstruction error against alpha.

usage: python scripts/lcurve.py [--noise 1e-4] [--seed 1] [--out results/lcurve.csv]
"""

import argparse
from pathlib import Path

import numpy as np

from carleman_lab.grid import SpatialGrid, TimeGrid, format_float, l2_norm_sq
from carleman_lab.scenario import assumption_scenario, modes
from carleman_lab.stability_b import extract_observations, reconstruct_b_lsq

FIELDS = ("dt_v_omega", "u_Tp", "v_Tp", "lap_u_Tp")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--noise", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--modes", type=int, default=8)
    ap.add_argument("--out", default="results/lcurve.csv")
    args = ap.parse_args()

    sc = assumption_scenario(0.0, 0, gamma=modes(0.05, -0.03)).materialize(
        SpatialGrid(1.0, 201), TimeGrid(0.0, 1.0, 400))
    obs = extract_observations(sc.solve_target(), sc.omega).with_noise(args.noise, args.seed,
                                                                        fields=FIELDS)
    ref = extract_observations(sc.solve_reference(), sc.omega)
    b = sc.target_coeffs.b.values
    rows = ["alpha,rel_l2_error,misfit,iterations,converged"]
    for alpha in 10.0 ** np.arange(-10, 0):
        res = reconstruct_b_lsq(obs, ref, sc, alpha, n_modes=args.modes)
        err = np.sqrt(l2_norm_sq(res.b_hat.values - b, sc.sgrid) / l2_norm_sq(b, sc.sgrid))
        rows.append(",".join([format_float(alpha), format_float(err), format_float(res.objective),
                              str(res.iterations), str(res.converged)]))
        print(rows[-1])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
