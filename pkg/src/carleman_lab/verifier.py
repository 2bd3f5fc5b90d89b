"""Both sides of the Carleman estimates, evaluated on grid fields.

EST3 is the estimate with the conjugated operators, EST4 its I(q) form,
EST10 the two-component system estimate with one observed component.
All reports carry one ``log_scale`` shared by every term, so ratios are
exact even when the raw weights underflow.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .grid import (Interval, ScalarField, SpaceTimeField, SpatialGrid, TimeGrid, format_float,
                   space_weights, time_weights)
from .operators import (_check_boundary, apply_M1, apply_M2, conjugate, eval_I,
                        interior_laplacian, time_derivative_array, weighted_integral)
from .solver import SystemTrajectory, difference_source
from .weights import WeightSet

DEGENERATE = 1e-300


@dataclass(frozen=True)
class CarlemanReport:
    estimate: str
    s: float
    lam: float
    lhs_terms: dict
    rhs_terms: dict
    log_scale: float
    fingerprint: str = ""

    @property
    def lhs_total(self) -> float:
        return float(sum(self.lhs_terms.values()))

    @property
    def rhs_total(self) -> float:
        return float(sum(self.rhs_terms.values()))

    @property
    def degenerate(self) -> bool:
        return self.lhs_total < DEGENERATE and self.rhs_total < DEGENERATE

    @property
    def ratio(self) -> float:
        if self.degenerate or self.rhs_total <= 0:
            return float("nan")
        return self.lhs_total / self.rhs_total

    @property
    def flag(self) -> str:
        if self.degenerate:
            return "degenerate"
        return "ok" if self.rhs_total > 0 else "rhs_zero"


def fingerprint(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(np.ascontiguousarray(np.asarray(p, dtype=float)).tobytes())
    return h.hexdigest()[:16]


def _rhs_terms(q_vals, w: WeightSet, sgrid, tgrid, omega, shift) -> dict:
    s, lam = w.s, w.lam
    residual = time_derivative_array(q_vals, tgrid) - interior_laplacian(q_vals, sgrid)
    return {
        "observation": s**3 * lam**4 * weighted_integral(q_vals**2, w, 3, sgrid, tgrid, shift,
                                                         region=omega),
        "residual": weighted_integral(residual**2, w, 0, sgrid, tgrid, shift),
    }


def _as_interval(omega):
    return omega if isinstance(omega, Interval) else Interval(*omega)


def eval_estimate3(q: SpaceTimeField, w: WeightSet, omega) -> CarlemanReport:
    """||M1 psi||^2 + ||M2 psi||^2 + gradient + zero-order terms vs observation
    + residual, with psi = exp(-s eta) q."""
    _check_boundary(q.values, "q")
    sgrid, tgrid = q.sgrid, q.tgrid
    omega = _as_interval(omega)
    shift = w.log_scale(sgrid, tgrid)
    psi = conjugate(q, w, shift)
    wt, wx = time_weights(tgrid), space_weights(sgrid)
    m1 = apply_M1(psi, w).values
    m2 = apply_M2(psi, w).values
    I = eval_I(q, w, shift)
    lhs = {
        "M1": float(wt @ m1**2 @ wx),
        "M2": float(wt @ m2**2 @ wx),
        "grad": I.term_grad,
        "zero": I.term_zero,
    }
    rhs = _rhs_terms(q.values, w, sgrid, tgrid, omega, shift)
    return CarlemanReport("EST3", w.s, w.lam, lhs, rhs, shift,
                          fingerprint(q.values, [w.s, w.lam, w.beta.K]))


def eval_estimate4(q: SpaceTimeField, w: WeightSet, omega) -> CarlemanReport:
    """I(q) vs the same observation + residual right side."""
    _check_boundary(q.values, "q")
    sgrid, tgrid = q.sgrid, q.tgrid
    omega = _as_interval(omega)
    shift = w.log_scale(sgrid, tgrid)
    I = eval_I(q, w, shift)
    lhs = {"dtlap": I.term_dtlap, "grad": I.term_grad, "zero": I.term_zero}
    rhs = _rhs_terms(q.values, w, sgrid, tgrid, omega, shift)
    return CarlemanReport("EST4", w.s, w.lam, lhs, rhs, shift,
                          fingerprint(q.values, [w.s, w.lam, w.beta.K]))


def eval_estimate10(yz: SystemTrajectory, gamma, reference: SystemTrajectory, w: WeightSet,
                    omega, c0: float) -> CarlemanReport:
    """I(y) + I(z) vs s^7 lam^8 int_omega e^{-2 s eta} phi^7 |z|^2 + ||e^{-s eta} gamma d_t v~||^2."""
    sgrid, tgrid = yz.sgrid, yz.tgrid
    omega = _as_interval(omega)
    c = yz.coeffs.c.values
    on_omega = space_weights(sgrid, omega) > 0
    if np.any(c[on_omega] < c0):
        raise PreconditionError(f"c >= c0 = {c0} fails on omega (min {np.min(c[on_omega]):.4g})")
    shift = w.log_scale(sgrid, tgrid)
    Iy = eval_I(yz.u, w, shift)
    Iz = eval_I(yz.v, w, shift)
    s, lam = w.s, w.lam
    src = difference_source(gamma, reference)
    lhs = {"I_y": Iy.total, "I_z": Iz.total}
    rhs = {
        "observation": s**7 * lam**8 * weighted_integral(yz.v.values**2, w, 7, sgrid, tgrid,
                                                         shift, region=omega),
        "source": weighted_integral(src**2, w, 0, sgrid, tgrid, shift),
    }
    g = gamma.values if isinstance(gamma, ScalarField) else gamma
    return CarlemanReport("EST10", s, lam, lhs, rhs, shift,
                          fingerprint(g, [s, lam, w.beta.K]))


# -----------------------------------------------------------------------------
# test fields and sweeps

def generate_test_field(seed: int, n_modes: int, sgrid: SpatialGrid, tgrid: TimeGrid
                        ) -> SpaceTimeField:
    """q = sum_j alpha_j sin(j pi x / L) p_j(t), seeded; p_j cubic in the
    normalized time tau = (t - t0)/(T - t0)."""
    if not 0 <= n_modes <= 8:
        raise ValueError(f"mode count must be in 0..8, got {n_modes}")
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-1.0, 1.0, size=n_modes)
    poly = rng.uniform(-1.0, 1.0, size=(n_modes, 4))
    tau = (tgrid.t - tgrid.t0) / (tgrid.T - tgrid.t0)
    q = np.zeros((tgrid.nt + 1, sgrid.n))
    for j in range(n_modes):
        p = np.polynomial.polynomial.polyval(tau, poly[j])
        q += alpha[j] * np.outer(p, np.sin((j + 1) * np.pi * sgrid.x / sgrid.length))
    q[:, 0] = q[:, -1] = 0.0
    return SpaceTimeField(sgrid, tgrid, q)


@dataclass(frozen=True)
class SweepRow:
    seed: int
    s: float
    lam: float
    report: CarlemanReport = field(repr=False)

    CSV_HEADER = "seed,s,lambda,lhs_total,rhs_total,ratio,flag"

    def csv_row(self) -> str:
        r = self.report
        return ",".join([str(self.seed), format_float(self.s), format_float(self.lam),
                         format_float(r.lhs_total), format_float(r.rhs_total),
                         format_float(r.ratio), r.flag])


@dataclass(frozen=True)
class SweepTable:
    rows: tuple

    def max_ratios(self) -> list:
        """(s, lam, max ratio, argmax seed) per sweep point; nan when all degenerate."""
        out = []
        keys = sorted({(r.s, r.lam) for r in self.rows})
        for s, lam in keys:
            group = [r for r in self.rows if r.s == s and r.lam == lam]
            finite = [r for r in group if np.isfinite(r.report.ratio)]
            if not finite:
                out.append((s, lam, float("nan"), None))
                continue
            best = max(finite, key=lambda r: (r.report.ratio, -r.seed))
            out.append((s, lam, best.report.ratio, best.seed))
        return out

    def to_csv(self, path) -> None:
        lines = [SweepRow.CSV_HEADER] + [r.csv_row() for r in self.rows]
        from pathlib import Path
        Path(path).write_text("\n".join(lines) + "\n")


def max_workers() -> int:
    env = os.environ.get("CARLEMAN_LAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def constant_sweep(seeds, s_list, lam_list, w: WeightSet, sgrid: SpatialGrid, tgrid: TimeGrid,
                   omega, n_modes: int = 4, estimate: str = "EST4",
                   fields: dict | None = None) -> SweepTable:
    """Evaluate one estimate for every (seed, s, lam); rows ordered by (seed, s, lam).

    ``fields`` may map seed -> SpaceTimeField to bypass the generator.
    """
    if not (len(seeds) and len(s_list) and len(lam_list)):
        raise ValueError("seed, s and lambda lists must be nonempty")
    evaluate = {"EST3": eval_estimate3, "EST4": eval_estimate4}[estimate]
    jobs = [(seed, s, lam) for seed in seeds for s in s_list for lam in lam_list]
    cache = {}
    for seed in seeds:
        cache[seed] = (fields or {}).get(seed) or generate_test_field(seed, n_modes, sgrid, tgrid)

    def run(job):
        seed, s, lam = job
        ws = w.with_params(s=float(s), lam=float(lam))
        return SweepRow(seed, float(s), float(lam), evaluate(cache[seed], ws, omega))

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        rows = list(pool.map(run, jobs))
    return SweepTable(tuple(rows))
