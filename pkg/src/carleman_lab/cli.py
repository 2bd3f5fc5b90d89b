"""Command-line runner: ``carleman-lab <command> --config FILE [--out DIR] [--seed N]``.

Exit codes: 0 all checks pass, 2 a verification check failed, 1 error.
Each run writes ``manifest.json`` (config echo, versions, seeds, checks,
wall time) next to its CSVs.  CSV content depends only on (config, seed).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .config import COMMANDS, ScenarioConfig, load_config, validate
from .errors import (ConfigurationError, ConstructionError, PreconditionError,
                     ReconstructionError, SolverError)
from .grid import format_float, l2_norm_sq, write_field_csv
from .solver import check_positivity, solve_difference_system, write_trajectory_binary
from .stability_b import (extract_observations, reconstruct_b_direct, reconstruct_b_lsq,
                          snapshot_identity_residual, stability_experiment)
from .stability_ic import (ICStabilityRecord, ic_stability_experiment, initial_yz,
                           gronwall_check, logconvexity_check, max_product, sine_family)
from .verifier import constant_sweep, eval_estimate10
from .weights import (CarlemanConfig, WeightSet, build_beta, check_weight_bounds,
                      export_weights_csv, validate_beta)


def _write_lines(path: Path, header: str, rows) -> None:
    path.write_text("\n".join([header, *rows]) + "\n")


def _row(*vals) -> str:
    return ",".join(v if isinstance(v, str) else format_float(v) for v in vals)


def _cell(v) -> str:
    return str(v) if isinstance(v, bool) else format_float(v)


def _weights(cfg: ScenarioConfig, s: float, lam: float) -> WeightSet:
    conf = CarlemanConfig(lam, s, cfg.m, cfg.subintervals, cfg.x0)
    return WeightSet.from_config(conf, cfg.sgrid, cfg.tgrid)


# -----------------------------------------------------------------------------
# commands; each returns a dict of named boolean checks

def run_forward(cfg, out: Path) -> dict:
    sc = cfg.spec().materialize(cfg.sgrid, cfg.tgrid)
    traj = sc.solve_target()
    traj.to_csv(out / "trajectory.csv")
    write_trajectory_binary(out / "trajectory.bin", traj)
    pos = check_positivity(traj, cfg.r)
    _write_lines(out / "forward_summary.csv", "quantity,value", [
        _row("min_v_Tprime", pos.min_at_t_prime), _row("max_abs_u", float(np.max(np.abs(traj.u.values)))),
        _row("max_abs_v", float(np.max(np.abs(traj.v.values))))])
    return {"finite": bool(np.all(np.isfinite(traj.u.values)) and np.all(np.isfinite(traj.v.values)))}


def run_weights(cfg, out: Path) -> dict:
    sgrid, tgrid = cfg.sgrid, cfg.tgrid
    beta = build_beta(sgrid, cfg.subintervals, cfg.x0, cfg.m)
    val = validate_beta(beta, cfg.subintervals, sgrid)
    fields = [f for f in val.__dataclass_fields__]
    _write_lines(out / "beta_validation.csv", "condition,value",
                 [f"{f},{_cell(getattr(val, f))}" for f in fields])
    write_field_csv(out / "beta.csv", {"x": sgrid.x, "beta_tilde": beta.tilde(sgrid.x),
                                       "beta": beta(sgrid.x)})
    rows = []
    ok = True
    for s in cfg.s_list:
        for lam in cfg.lam_list:
            w = _weights(cfg, s, lam)
            rep = check_weight_bounds(w, sgrid, tgrid)
            ok &= rep.passed
            rows.append(_row(s, lam, *rep.as_dict().values()))
    _write_lines(out / "weight_bounds.csv", "s,lambda,dt_phi,dt_eta,phi_phi3,phi3_phi7,one_phi3",
                 rows)
    export_weights_csv(out / "weights.csv", _weights(cfg, cfg.s_list[0], cfg.lam_list[0]),
                       sgrid, tgrid)
    return {"beta_valid": val.passed, "weight_bounds_finite": bool(ok)}


def run_carleman(cfg, out: Path) -> dict:
    sgrid, tgrid = cfg.sgrid, cfg.tgrid
    w = _weights(cfg, cfg.s_list[0], cfg.lam_list[0])
    checks = {}
    for est in ("EST3", "EST4"):
        table = constant_sweep(cfg.seeds, cfg.s_list, cfg.lam_list, w, sgrid, tgrid, cfg.omega,
                               n_modes=cfg.n_modes, estimate=est)
        table.to_csv(out / f"carleman_{est}.csv")
        maxima = table.max_ratios()
        _write_lines(out / f"carleman_{est}_max.csv", "s,lambda,max_ratio,seed",
                     [_row(s, lam, r, str(seed)) for s, lam, r, seed in maxima])
        bad = [r for r in table.rows if r.report.flag == "ok" and not np.isfinite(r.report.ratio)]
        checks[f"{est}_finite"] = not bad
        s_sorted = sorted(cfg.s_list)
        if len(s_sorted) >= 2:
            top = max(r for s, _, r, _ in maxima if s == s_sorted[-1])
            prev = max(r for s, _, r, _ in maxima if s == s_sorted[-2])
            checks[f"{est}_no_blowup"] = bool(top <= 2.0 * prev)
    return checks


def run_carleman_sys(cfg, out: Path) -> dict:
    sgrid, tgrid = cfg.sgrid, cfg.tgrid
    rows, finite = [], True
    for eps in cfg.eps:
        sc = cfg.spec(eps, perturb=False).materialize(sgrid, tgrid)
        ref = sc.solve_reference()
        yz = solve_difference_system(sc.target_coeffs, sc.gamma, ref, initial_yz(sc))
        for s in cfg.s_list:
            for lam in cfg.lam_list:
                rep = eval_estimate10(yz, sc.gamma, ref, _weights(cfg, s, lam), sc.omega, cfg.c0)
                finite &= rep.flag != "ok" or bool(np.isfinite(rep.ratio))
                rows.append(_row(eps, s, lam, rep.lhs_total, rep.rhs_total, rep.ratio, rep.flag))
    _write_lines(out / "carleman_sys.csv", "eps,s,lambda,lhs_total,rhs_total,ratio,flag", rows)
    return {"EST10_finite": bool(finite)}


def run_stab_b(cfg, out: Path) -> dict:
    reports = stability_experiment(cfg.spec(perturb=False), cfg.eps, cfg.sgrid, cfg.tgrid)
    _write_lines(out / "stability_b.csv", reports[0].CSV_HEADER if reports else "eps",
                 [r.csv_row() for r in reports])
    ratios = np.array([r.ratio for r in reports if r.flag == "ok"])
    finite = bool(np.all(np.isfinite(ratios)))
    spread = bool(finite and ratios.size and ratios.max() <= 10 * ratios.min())
    eps = cfg.eps[-1] if cfg.eps else 1.0
    ident = snapshot_identity_residual(cfg.spec(eps, perturb=False).materialize(cfg.sgrid, cfg.tgrid))
    _write_lines(out / "snapshot_identity.csv", "eps,residual,y_norm,relative",
                 [_row(eps, ident.norm, ident.y_norm, ident.relative)])
    return {"ratios_finite": finite, "ratios_within_10x": spread,
            "identity_residual": bool(ident.relative <= 5e-3)}


def run_stab_ic(cfg, out: Path) -> dict:
    spec = cfg.spec(0.0, perturb=False)
    records = ic_stability_experiment(spec, sine_family(cfg.eps), cfg.sgrid, cfg.tgrid)
    _write_lines(out / "stability_ic.csv", ICStabilityRecord.CSV_HEADER,
                 [r.csv_row() for r in records])
    rows = []
    for eps in cfg.eps:
        rep = gronwall_check(cfg.spec(eps).materialize(cfg.sgrid, cfg.tgrid))
        rows.append(_row(eps, rep.gamma_norm_sq, rep.constant))
    _write_lines(out / "gronwall.csv", "eps,gamma_norm_sq,constant", rows)
    bound = max_product(records)
    return {"products_finite": bool(np.isfinite(bound)) or not any(r.flag == "ok" for r in records)}


def run_logconvexity(cfg, out: Path) -> dict:
    rec = logconvexity_check(cfg.spec().materialize(cfg.sgrid, cfg.tgrid))
    rec.to_csv(out / "logconvexity.csv")
    _write_lines(out / "logconvexity_scan.csv", "C,C1", [_row(C, C1) for C, C1 in rec.scan])
    return {"log_convexity": rec.passed}


def run_reconstruct(cfg, out: Path, seed: int) -> dict:
    sgrid = cfg.sgrid
    sc = cfg.spec(perturb=False).materialize(sgrid, cfg.tgrid)
    obs = extract_observations(sc.solve_target(), sc.omega, with_dt_u=True)
    obs_ref = extract_observations(sc.solve_reference(), sc.omega, with_dt_u=True)
    if cfg.noise > 0:
        obs = obs.with_noise(cfg.noise, seed)
    b_true = sc.target_coeffs.b.values
    direct = reconstruct_b_direct(obs, obs_ref, sc.reference_coeffs.a, sc.reference_coeffs.b,
                                  r_floor=0.5 * cfg.r)
    lsq = reconstruct_b_lsq(obs, obs_ref, sc, cfg.alpha, budget=cfg.lsq_budget,
                            n_modes=cfg.lsq_modes)
    write_field_csv(out / "reconstruct_b.csv", {"x": sgrid.x, "b_true": b_true,
                                                "b_direct": direct.values,
                                                "b_lsq": lsq.b_hat.values})
    err = np.sqrt(l2_norm_sq(direct.values - b_true, sgrid) / l2_norm_sq(b_true, sgrid))
    _write_lines(out / "reconstruct_lsq.csv", "mode,coefficient",
                 [_row(str(j + 1), c) for j, c in enumerate(lsq.coefficients)])
    _write_lines(out / "reconstruct_summary.csv", "quantity,value", [
        _row("direct_rel_l2_error", err), _row("lsq_iterations", float(lsq.iterations)),
        _row("lsq_objective", lsq.objective), _row("lsq_grad_norm", lsq.grad_norm)])
    return {"lsq_converged": bool(lsq.converged), "direct_finite": bool(np.isfinite(err))}


RUNNERS = {"forward": run_forward, "weights": run_weights, "carleman": run_carleman,
           "carleman-sys": run_carleman_sys, "stab-b": run_stab_b, "stab-ic": run_stab_ic,
           "logconvexity": run_logconvexity}


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "artifact": pkg}


def run(command: str, cfg: ScenarioConfig, out: Path, seed: int | None = None) -> int:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    validate(cfg, command)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if command == "reconstruct":
        checks = run_reconstruct(cfg, out, cfg.seed)
    else:
        checks = RUNNERS[command](cfg, out)
    manifest = {
        "command": command, "config": cfg.echo(), "seeds": cfg.seeds,
        "versions": _versions(), "checks": checks,
        "wall_time_s": time.perf_counter() - start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0 if all(checks.values()) else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="carleman-lab")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None, help="output directory (default: experiment.output)")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        out = Path(args.out) if args.out is not None else Path(cfg.output) / args.command
        code = run(args.command, cfg, out, args.seed)
    except (ConfigurationError, ConstructionError, PreconditionError, ReconstructionError,
            SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: {'ok' if code == 0 else 'check failed'} -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
