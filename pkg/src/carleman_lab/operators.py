"""Finite-difference operators, the conjugated operators M1/M2, and I(q).

Weighted integrals are returned relative to a common scale: a report stores
``value * exp(-log_scale)`` where ``log_scale`` is the maximum of -2 s eta
over the grid.  Both sides of every inequality share that scale, so ratios
are unaffected while the stored numbers stay representable for large s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .grid import SpaceTimeField, SpatialGrid, TimeGrid, space_weights, time_weights
from .weights import WeightSet


def discrete_laplacian(f, grid: SpatialGrid) -> np.ndarray:
    """Three-point Laplacian along the last axis.

    Boundary entries carry the input values (identity rows), matching a
    system matrix whose boundary rows hold prescribed Dirichlet data.
    """
    f = np.asarray(f, dtype=float)
    out = f.copy()
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / grid.h**2
    return out


def interior_laplacian(f, grid: SpatialGrid) -> np.ndarray:
    """Like discrete_laplacian but with zeros in the boundary entries."""
    out = discrete_laplacian(f, grid)
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return out


def spatial_gradient(f, grid: SpatialGrid) -> np.ndarray:
    """Centered first differences; second-order one-sided at the ends."""
    return np.gradient(np.asarray(f, dtype=float), grid.h, axis=-1, edge_order=2)


def time_derivative(f):
    """Centered in the interior, second-order one-sided at t0 and T.

    Accepts a SpaceTimeField (returns one) or a raw (nt+1, n) array with a
    TimeGrid as second argument through :func:`time_derivative_array`.
    """
    if not isinstance(f, SpaceTimeField):
        raise TypeError("time_derivative expects a SpaceTimeField")
    return f.with_values(time_derivative_array(f.values, f.tgrid))


def time_derivative_array(values, tgrid: TimeGrid) -> np.ndarray:
    return np.gradient(np.asarray(values, dtype=float), tgrid.dt, axis=0, edge_order=2)


def _interior_coefficients(w: WeightSet, sgrid: SpatialGrid, tgrid: TimeGrid):
    """phi and d_t eta on the grid, zero on the t0/T rows.

    psi = exp(-s eta) q decays faster than any power of phi grows, so the
    singular products vanish on those rows.
    """
    shape = (tgrid.nt + 1, sgrid.n)
    phi = np.zeros(shape)
    dt_eta = np.zeros(shape)
    xx, tt = w.interior_mesh(sgrid, tgrid)
    phi[1:-1] = w.phi(xx, tt)
    dt_eta[1:-1] = w.dt_eta(xx, tt)
    return phi, dt_eta


def _check_boundary(values, what: str, tol: float = 1e-12) -> None:
    vals = np.asarray(values)
    scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
    if np.any(np.abs(vals[:, 0]) > tol * scale) or np.any(np.abs(vals[:, -1]) > tol * scale):
        raise PreconditionError(f"{what} must vanish on the spatial boundary")


def apply_M1(psi: SpaceTimeField, w: WeightSet) -> SpaceTimeField:
    """M1 psi = -lap psi - s^2 lam^2 |beta'|^2 phi^2 psi + s (d_t eta) psi."""
    sgrid, tgrid = psi.sgrid, psi.tgrid
    vals = psi.values
    _check_boundary(vals, "psi", tol=1e-12)
    phi, dt_eta = _interior_coefficients(w, sgrid, tgrid)
    grad_beta_sq = w.beta.gradient(sgrid.x) ** 2
    s, lam = w.s, w.lam
    out = -interior_laplacian(vals, sgrid)
    if s != 0:
        out = out - (s**2 * lam**2) * grad_beta_sq * phi**2 * vals + s * dt_eta * vals
    return psi.with_values(out)


def apply_M2(psi: SpaceTimeField, w: WeightSet) -> SpaceTimeField:
    """M2 psi = d_t psi + 2 s lam phi beta' psi_x + 2 s lam^2 phi |beta'|^2 psi."""
    sgrid, tgrid = psi.sgrid, psi.tgrid
    vals = psi.values
    _check_boundary(vals, "psi", tol=1e-12)
    phi, _ = _interior_coefficients(w, sgrid, tgrid)
    grad_beta = w.beta.gradient(sgrid.x)
    s, lam = w.s, w.lam
    out = time_derivative_array(vals, tgrid)
    if s != 0:
        out = out + 2.0 * s * lam * phi * grad_beta * spatial_gradient(vals, sgrid) \
            + 2.0 * s * lam**2 * phi * grad_beta**2 * vals
    return psi.with_values(out)


def conjugate(q: SpaceTimeField, w: WeightSet, shift: float = 0.0) -> SpaceTimeField:
    """psi = exp(-s eta - shift/2) q, exactly zero on the t0 and T rows.

    Uses the k = 0 exponent at half weight; ``shift`` is the report log-scale
    so that |psi|^2 carries the factor exp(-shift).
    """
    tt, xx = np.meshgrid(q.tgrid.t, q.sgrid.x, indexing="ij")
    factor = np.exp(w.exponent(xx, tt, 0, s=0.5 * w.s) - 0.5 * shift)
    return q.with_values(factor * q.values)


@dataclass(frozen=True)
class FunctionalBreakdown:
    """Terms of I(q), each stored as value * exp(-log_scale)."""

    s: float
    lam: float
    term_dtlap: float
    term_grad: float
    term_zero: float
    log_scale: float = 0.0

    @property
    def total(self) -> float:
        return self.term_dtlap + self.term_grad + self.term_zero

    def log_total(self) -> float:
        return float(np.log(self.total) + self.log_scale) if self.total > 0 else -np.inf

    def csv_row(self) -> str:
        from .grid import format_float
        return ",".join(format_float(v) for v in
                        (self.s, self.lam, self.term_dtlap, self.term_grad,
                         self.term_zero, self.total))

    CSV_HEADER = "s,lambda,term_dtlap,term_grad,term_zero,total"


def weighted_integral(density, w: WeightSet, k: int, sgrid: SpatialGrid, tgrid: TimeGrid,
                      shift: float, region=None, stop_index=None) -> float:
    """Quadrature of exp(-2 s eta) phi^k density, scaled by exp(-shift)."""
    weight = w.grid_values(sgrid, tgrid, k, shift=shift)
    integrand = weight * density
    return float(time_weights(tgrid, stop_index) @ integrand @ space_weights(sgrid, region))


def eval_I(q: SpaceTimeField, w: WeightSet, shift: float | None = None) -> FunctionalBreakdown:
    """The Carleman functional I(q) term by term."""
    sgrid, tgrid = q.sgrid, q.tgrid
    vals = q.values
    _check_boundary(vals, "q")
    if shift is None:
        shift = w.log_scale(sgrid, tgrid)
    s, lam = w.s, w.lam
    dq_t = time_derivative_array(vals, tgrid)
    lap_q = interior_laplacian(vals, sgrid)
    dq_x = spatial_gradient(vals, sgrid)
    dtlap = weighted_integral(dq_t**2 + lap_q**2, w, -1, sgrid, tgrid, shift) / s
    grad = s * lam**2 * weighted_integral(dq_x**2, w, 1, sgrid, tgrid, shift)
    zero = s**3 * lam**4 * weighted_integral(vals**2, w, 3, sgrid, tgrid, shift)
    return FunctionalBreakdown(s, lam, dtlap, grad, zero, shift)
