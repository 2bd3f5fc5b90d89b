"""Initial-condition stability: the Gronwall bound for the source-driven part,
log-convexity of the data-driven part, and the log-stability experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import SpatialGrid, TimeGrid, format_float, l2_norm_sq, time_weights
from .operators import interior_laplacian
from .scenario import Scenario, ScenarioSpec, SineSeries
from .solver import (difference_initial_data, l2_in_time, solve_difference_system,
                     solve_split)
from .stability_b import RejectedScenario, extract_observations, stability_report

DEGENERATE = 1e-300
C1_LIMIT = 1e6


def initial_yz(scenario: Scenario):
    """(y, z) at t0 for the difference system of ``scenario``."""
    ref = scenario.solve_reference()
    U0 = scenario.init[0] - scenario.init_ref[0]
    V0 = scenario.init[1] - scenario.init_ref[1]
    return difference_initial_data(scenario.target_coeffs, scenario.gamma, ref, U0, V0, 0)


# -----------------------------------------------------------------------------
# Gronwall bound for the source-driven part

@dataclass(frozen=True)
class GronwallReport:
    constant: float
    gamma_norm_sq: float
    energy: np.ndarray = field(repr=False)

    @property
    def degenerate(self) -> bool:
        return self.gamma_norm_sq < DEGENERATE

    @property
    def passed(self) -> bool:
        return self.degenerate or bool(np.isfinite(self.constant))


def gronwall_check(scenario: Scenario) -> GronwallReport:
    """max over [t0, T'] of (||y1||^2 + ||z1||^2) / ||gamma||^2."""
    ref = scenario.solve_reference()
    sourced, _ = solve_split(scenario.target_coeffs, scenario.gamma, ref, initial_yz(scenario))
    grid = scenario.sgrid
    k = scenario.tgrid.prime_index
    energy = l2_in_time(sourced.u.values[: k + 1], grid) + l2_in_time(sourced.v.values[: k + 1], grid)
    gnorm = l2_norm_sq(scenario.gamma, grid)
    const = float("nan") if gnorm < DEGENERATE else float(np.max(energy) / gnorm)
    return GronwallReport(const, gnorm, energy)


lemma41_check = gronwall_check  # interface name


# -----------------------------------------------------------------------------
# log-convexity of the data-driven part

def mu_profile(t, t0: float, t_prime: float, C: float) -> np.ndarray:
    """(e^{-C t0} - e^{-C t}) / (e^{-C t0} - e^{-C T'}); the C -> 0 limit is linear."""
    t = np.asarray(t, dtype=float)
    if C == 0:
        return (t - t0) / (t_prime - t0)
    return np.expm1(-C * (t - t0)) / np.expm1(-C * (t_prime - t0))


@dataclass(frozen=True)
class LogConvexityRecord:
    C: float
    C1: float
    M: float
    t: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    scan: tuple = ()

    @property
    def degenerate(self) -> bool:
        return self.M < DEGENERATE

    @property
    def margins(self) -> np.ndarray:
        return self.rhs - self.norms

    @property
    def passed(self) -> bool:
        return self.degenerate or (self.C1 <= C1_LIMIT and bool(np.all(self.margins >= -1e-12 * self.M)))

    def to_csv(self, path) -> None:
        lines = ["t,mu,lhs,rhs,margin"]
        for row in zip(self.t, self.mu, self.norms, self.rhs, self.margins):
            lines.append(",".join(format_float(v) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")


def fit_log_convexity(norms, t, t_prime: float, C_scan) -> LogConvexityRecord:
    """Smallest C1 >= 1 over the scan with norms[k] <= C1 M^(1-mu) norms[-1]^mu."""
    norms = np.asarray(norms, dtype=float)
    t = np.asarray(t, dtype=float)
    M = float(np.max(norms))
    if M < DEGENERATE:
        mu = mu_profile(t, t[0], t_prime, float(C_scan[0]) if len(C_scan) else 0.0)
        return LogConvexityRecord(float(C_scan[0]) if len(C_scan) else 0.0, 1.0, M, t, norms,
                                  mu, np.zeros_like(norms), tuple())
    end = norms[-1]
    best = None
    scan = []
    for C in C_scan:
        mu = mu_profile(t, t[0], t_prime, float(C))
        with np.errstate(divide="ignore"):
            log_base = (1.0 - mu) * np.log(M) + mu * np.log(end)
        base = np.exp(log_base)
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(norms > 0, norms / base, 0.0)
        C1 = float(max(1.0, np.nanmax(need)))
        scan.append((float(C), C1))
        if best is None or C1 < best[1]:
            best = (float(C), C1, mu, C1 * base)
    C, C1, mu, rhs = best
    return LogConvexityRecord(C, C1, M, t, norms, mu, rhs, tuple(scan))


def default_C_scan(alpha: float) -> tuple:
    return (alpha / 4, alpha / 2, alpha, 2 * alpha)


def data_part_norms(scenario: Scenario) -> np.ndarray:
    """||y2(t)||^2 + ||z2(t)||^2 on [t0, T']."""
    ref = scenario.solve_reference()
    _, free = solve_split(scenario.target_coeffs, scenario.gamma, ref, initial_yz(scenario))
    k = scenario.tgrid.prime_index
    grid = scenario.sgrid
    return l2_in_time(free.u.values[: k + 1], grid) + l2_in_time(free.v.values[: k + 1], grid)


def logconvexity_check(scenario: Scenario, C_scan=None) -> LogConvexityRecord:
    if C_scan is None:
        C_scan = default_C_scan(scenario.target_coeffs.coupling_norm())
    norms = data_part_norms(scenario)
    tgrid = scenario.tgrid
    k = tgrid.prime_index
    return fit_log_convexity(norms, tgrid.t[: k + 1], tgrid.t_prime, tuple(C_scan))


def theta_interpolation_defect(norms, t, t_prime: float) -> float:
    """max relative gap between ||W(t)|| and ||W(t0)||^(1-theta) ||W(T')||^theta."""
    w = np.sqrt(np.asarray(norms, dtype=float))
    theta = mu_profile(t, t[0], t_prime, 0.0)
    interp = w[0] ** (1 - theta) * w[-1] ** theta
    return float(np.max(np.abs(w - interp) / interp))


# -----------------------------------------------------------------------------
# log-stability of initial data

@dataclass(frozen=True)
class ICStabilityRecord:
    eps: float
    E: float
    ic_error: float

    @property
    def flag(self) -> str:
        if self.E <= 0 or self.E < DEGENERATE:
            return "E_zero"
        if self.E >= 1:
            return "E_ge_1"
        return "ok"

    @property
    def product(self) -> float:
        if self.flag == "E_zero":
            return float("nan")
        return self.ic_error * abs(np.log(self.E))

    CSV_HEADER = "eps,E,ic_error,product,flag"

    def csv_row(self) -> str:
        return ",".join(format_float(v) for v in (self.eps, self.E, self.ic_error, self.product)) \
            + "," + self.flag


def h2_norm_sq(f, grid: SpatialGrid) -> float:
    """||f||^2 + ||lap f||^2 with boundary rows of the Laplacian left out."""
    return l2_norm_sq(f, grid) + l2_norm_sq(interior_laplacian(f, grid), grid)


def ic_record(scenario: Scenario, eps: float = 0.0) -> ICStabilityRecord:
    ref = scenario.solve_reference()
    tgt = scenario.solve_target()
    grid = scenario.sgrid
    k = scenario.tgrid.prime_index
    obs = extract_observations(tgt, scenario.omega)
    obs_ref = extract_observations(ref, scenario.omega)
    rep = stability_report(obs, obs_ref, scenario.gamma)
    U = tgt.u.values - ref.u.values
    V = tgt.v.values - ref.v.values
    E = rep.obs_term + h2_norm_sq(U[k], grid) + h2_norm_sq(V[k], grid)
    ic_error = l2_norm_sq(U[0], grid) + l2_norm_sq(V[0], grid)
    return ICStabilityRecord(float(eps), float(E), float(ic_error))


@dataclass(frozen=True)
class Perturbation:
    eps: float
    gamma: SineSeries = SineSeries()
    du0: SineSeries = SineSeries()
    dv0: SineSeries = SineSeries()


def sine_family(eps_list, mode: int = 1) -> list:
    """delta u0 = eps sin(mode pi x / L), no change in v0 or b."""
    amps = [0.0] * (mode - 1)
    return [Perturbation(eps, du0=SineSeries(0.0, tuple(amps + [eps]))) for eps in eps_list]


def ic_stability_experiment(spec: ScenarioSpec, family, sgrid: SpatialGrid, tgrid: TimeGrid
                            ) -> list[ICStabilityRecord]:
    base = spec.materialize(sgrid, tgrid)
    report = base.check()
    if not report.passed:
        raise RejectedScenario(report.violations)
    out = []
    for p in family:
        sc_spec = spec.with_gamma(p.gamma).with_initial_perturbation(p.du0, p.dv0)
        sc = sc_spec.materialize(sgrid, tgrid)
        if not sc.target_in_bound():
            raise RejectedScenario([f"b leaves Lambda(R) at eps={p.eps}"])
        sc._reference = base.solve_reference()
        out.append(ic_record(sc, p.eps))
    return out


def max_product(records) -> float:
    vals = [r.product for r in records if r.flag == "ok"]
    return float(max(vals)) if vals else float("nan")


def translation_identity_defect(scenario: Scenario) -> float:
    """Relative L2 gap in U(t0) = U(T') - int_{t0}^{T'} y ds (trapezoid in s)."""
    ref = scenario.solve_reference()
    tgt = scenario.solve_target()
    y = solve_difference_system(scenario.target_coeffs, scenario.gamma, ref,
                                initial_yz(scenario)).u.values
    k = scenario.tgrid.prime_index
    wt = time_weights(scenario.tgrid, stop_index=k)
    U = tgt.u.values - ref.u.values
    rebuilt = U[k] - wt @ y
    grid = scenario.sgrid
    denom = np.sqrt(l2_norm_sq(U[0], grid))
    return float(np.sqrt(l2_norm_sq(rebuilt - U[0], grid)) / denom) if denom > 0 else 0.0
