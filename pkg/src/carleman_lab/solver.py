"""Crank-Nicolson solver for the linear 2x2 reaction-diffusion system

    u_t = u_xx + a u + b v + S,
    v_t = v_xx + c u + d v,

with Dirichlet data on both ends.  The unknowns are interleaved
(u_0, v_0, u_1, v_1, ...) so each step is a banded solve with two sub- and
two super-diagonals; the zero-order coupling sits inside the implicit
operator.  Steps are taken in increment form, which keeps steady states
bit-for-bit steady.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, onenormest

from .errors import ConfigurationError, SolverError
from .grid import (ScalarField, SpaceTimeField, SpatialGrid, TimeGrid, l2_norm_sq,
                   write_field_csv)
from .operators import interior_laplacian, time_derivative_array

MAX_CONDITION = 1e12
KL = KU = 2


@dataclass(frozen=True)
class CoefficientSet:
    a: ScalarField
    b: ScalarField
    c: ScalarField
    d: ScalarField
    R: float

    @classmethod
    def constant(cls, grid: SpatialGrid, a=0.0, b=0.0, c=0.0, d=0.0, R=10.0) -> "CoefficientSet":
        return cls(*(ScalarField.constant(grid, v) for v in (a, b, c, d)), R=R)

    @property
    def grid(self) -> SpatialGrid:
        return self.a.grid

    def sup_norms(self) -> dict:
        return {k: float(np.max(np.abs(getattr(self, k).values))) for k in "abcd"}

    def in_bound(self) -> bool:
        return all(v <= self.R for v in self.sup_norms().values())

    def with_b(self, b) -> "CoefficientSet":
        vals = b.values if isinstance(b, ScalarField) else np.asarray(b, dtype=float)
        return CoefficientSet(self.a, ScalarField(self.grid, vals), self.c, self.d, self.R)

    def coupling_norm(self) -> float:
        """max over x of the spectral norm of [[a, b], [c, d]]."""
        mats = np.stack([[self.a.values, self.b.values],
                         [self.c.values, self.d.values]]).transpose(2, 0, 1)
        return float(np.max(np.linalg.norm(mats, ord=2, axis=(1, 2))))


@dataclass(frozen=True)
class BoundaryData:
    """Left/right traces: ``g[k] = (u(t_k, 0), u(t_k, L))``, same for ``h`` and v.

    Values are taken as given; no regularity in time is checked, so callers
    should sample smooth closed-form data.
    """

    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name in ("g", "h"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite (nt+1, 2) array")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def constant(cls, tgrid: TimeGrid, g: float = 0.0, h: float = 0.0) -> "BoundaryData":
        ones = np.ones((tgrid.nt + 1, 2))
        return cls(g * ones, h * ones)

    @classmethod
    def zeros(cls, tgrid: TimeGrid) -> "BoundaryData":
        return cls.constant(tgrid)


@dataclass(frozen=True)
class SystemTrajectory:
    u: SpaceTimeField
    v: SpaceTimeField
    coeffs: CoefficientSet

    @property
    def sgrid(self) -> SpatialGrid:
        return self.u.sgrid

    @property
    def tgrid(self) -> TimeGrid:
        return self.u.tgrid

    def to_csv(self, path) -> None:
        tt, xx = np.meshgrid(self.tgrid.t, self.sgrid.x, indexing="ij")
        write_field_csv(path, {"x": xx, "t": tt, "u": self.u.values, "v": self.v.values})

    def dump(self, path) -> None:
        write_trajectory_binary(path, self)


# -----------------------------------------------------------------------------
# assembly

def _banded_system(coeffs: CoefficientSet, dt: float) -> np.ndarray:
    """LAPACK band storage of I - dt/2 L (identity rows on the boundary)."""
    grid = coeffs.grid
    n = grid.n
    N = 2 * n
    r = 0.5 * dt / grid.h**2
    half = 0.5 * dt
    a, b, c, d = (getattr(coeffs, k).values for k in "abcd")
    ab = np.zeros((2 * KL + KU + 1, N))

    def put(row, col, val):
        ab[KL + KU + row - col, col] = val

    for i in range(n):
        iu, iv = 2 * i, 2 * i + 1
        if i == 0 or i == n - 1:
            put(iu, iu, 1.0)
            put(iv, iv, 1.0)
            continue
        put(iu, iu, 1.0 + 2.0 * r - half * a[i])
        put(iu, iu - 2, -r)
        put(iu, iu + 2, -r)
        put(iu, iv, -half * b[i])
        put(iv, iv, 1.0 + 2.0 * r - half * d[i])
        put(iv, iv - 2, -r)
        put(iv, iv + 2, -r)
        put(iv, iu, -half * c[i])
    return ab


def _band_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    N = ab.shape[1]
    y = np.zeros(N)
    for off in range(-KL, KU + 1):
        diag = ab[KL + KU - off]
        if off >= 0:
            y[: N - off] += diag[off:] * x[off:]
        else:
            y[-off:] += diag[: N + off] * x[: N + off]
    return y


class _StepFactor:
    """Banded LU of the step matrix with a 1-norm condition estimate."""

    def __init__(self, coeffs: CoefficientSet, dt: float):
        ab = _banded_system(coeffs, dt)
        self.ab = ab
        lu, piv, info = lapack.dgbtrf(ab, KL, KU)
        if info != 0:
            raise SolverError(f"step matrix is singular (dgbtrf info={info}) at step 1", step=1)
        self.lu, self.piv = lu, piv
        self.N = ab.shape[1]

    def solve(self, rhs: np.ndarray, trans: int = 0) -> np.ndarray:
        x, info = lapack.dgbtrs(self.lu, KL, KU, rhs, self.piv, trans=trans)
        if info != 0:
            raise SolverError(f"banded solve failed (info={info})")
        return x

    def condition_estimate(self) -> float:
        N = self.N
        col_sums = np.zeros(N)
        for off in range(-KL, KU + 1):
            diag = np.abs(self.ab[KL + KU - off])
            col_sums += diag  # column j collects every stored entry of column j
        norm_a = float(np.max(col_sums))
        inv = LinearOperator((N, N), matvec=lambda v: self.solve(np.ravel(v)),
                             rmatvec=lambda v: self.solve(np.ravel(v), trans=1),
                             dtype=float)
        return norm_a * float(onenormest(inv))


def _apply_L(u, v, coeffs: CoefficientSet, h: float):
    lu = interior_laplacian(u, coeffs.grid)
    lv = interior_laplacian(v, coeffs.grid)
    a, b, c, d = (getattr(coeffs, k).values for k in "abcd")
    fu = lu + a * u + b * v
    fv = lv + c * u + d * v
    fu[0] = fu[-1] = fv[0] = fv[-1] = 0.0
    return fu, fv


def _as_values(f, n: int) -> np.ndarray:
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    if vals.shape != (n,):
        raise ConfigurationError(f"initial data must have {n} values, got {vals.shape}")
    return vals


def solve_forward(coeffs: CoefficientSet, bc: BoundaryData, init, source=None,
                  tgrid: TimeGrid | None = None, check_bound: bool = True,
                  check_conditioning: bool = True) -> SystemTrajectory:
    """Crank-Nicolson solve of the coupled system on ``tgrid``.

    ``init`` is the pair (u, v) at t0; its boundary entries must agree with
    the boundary data at t0.  ``source`` (optional, (nt+1, n) array or
    SpaceTimeField) is added to the first equation.
    """
    if tgrid is None:
        raise ConfigurationError("a TimeGrid is required")
    sgrid = coeffs.grid
    n, nt, dt = sgrid.n, tgrid.nt, tgrid.dt
    if check_bound and not coeffs.in_bound():
        raise ConfigurationError(f"coefficients leave Lambda(R), R={coeffs.R}: {coeffs.sup_norms()}")
    if bc.g.shape != (nt + 1, 2) or bc.h.shape != (nt + 1, 2):
        raise ConfigurationError("boundary data do not match the time grid")
    u0 = _as_values(init[0], n)
    v0 = _as_values(init[1], n)
    scale = 1.0 + max(np.max(np.abs(bc.g[0])), np.max(np.abs(bc.h[0])))
    mismatch = max(abs(u0[0] - bc.g[0, 0]), abs(u0[-1] - bc.g[0, 1]),
                   abs(v0[0] - bc.h[0, 0]), abs(v0[-1] - bc.h[0, 1]))
    if mismatch > 1e-10 * scale:
        raise ConfigurationError(f"initial data disagree with boundary data at t0 by {mismatch:.3g}")

    if source is None:
        src = None
    else:
        src = source.values if isinstance(source, SpaceTimeField) else np.asarray(source, float)
        if src.shape != (nt + 1, n):
            raise ConfigurationError(f"source must have shape {(nt + 1, n)}")
        if not np.any(src):
            src = None

    factor = _StepFactor(coeffs, dt)
    if check_conditioning:
        cond = factor.condition_estimate()
        if not np.isfinite(cond) or cond >= MAX_CONDITION:
            raise SolverError(f"step matrix ill-conditioned (estimate {cond:.3g}) at step 1", step=1)

    U = np.empty((nt + 1, n))
    V = np.empty((nt + 1, n))
    U[0], V[0] = u0, v0
    u, v = u0.copy(), v0.copy()
    rhs = np.empty(2 * n)
    for k in range(nt):
        fu, fv = _apply_L(u, v, coeffs, sgrid.h)
        ru = dt * fu
        if src is not None:
            ru[1:-1] += 0.5 * dt * (src[k, 1:-1] + src[k + 1, 1:-1])
        rv = dt * fv
        ru[0] = bc.g[k + 1, 0] - bc.g[k, 0]
        ru[-1] = bc.g[k + 1, 1] - bc.g[k, 1]
        rv[0] = bc.h[k + 1, 0] - bc.h[k, 0]
        rv[-1] = bc.h[k + 1, 1] - bc.h[k, 1]
        rhs[0::2] = ru
        rhs[1::2] = rv
        delta = factor.solve(rhs)
        if not np.all(np.isfinite(delta)):
            raise SolverError(f"non-finite update at step {k + 1}", step=k + 1)
        u = u + delta[0::2]
        v = v + delta[1::2]
        # pin boundary values exactly to the data
        u[0], u[-1] = bc.g[k + 1]
        v[0], v[-1] = bc.h[k + 1]
        U[k + 1], V[k + 1] = u, v
    return SystemTrajectory(SpaceTimeField(sgrid, tgrid, U), SpaceTimeField(sgrid, tgrid, V), coeffs)


# -----------------------------------------------------------------------------
# difference system and splitting

def gamma_values(gamma, n: int) -> np.ndarray:
    return gamma.values if isinstance(gamma, ScalarField) else np.asarray(gamma, float).reshape(n)


def difference_source(gamma, reference: SystemTrajectory) -> np.ndarray:
    """gamma * d_t v_tilde on the grid (d_t via the stored reference)."""
    g = gamma_values(gamma, reference.sgrid.n)
    return g * time_derivative_array(reference.v.values, reference.tgrid)


def difference_initial_data(coeffs: CoefficientSet, gamma, reference: SystemTrajectory,
                            U0, V0, index: int = 0):
    """(y, z) at a time node from U, V there:

    y = lap U + a U + b V + gamma v_tilde,  z = lap V + c U + d V,

    with zero boundary entries.
    """
    grid = coeffs.grid
    U0 = _as_values(U0, grid.n)
    V0 = _as_values(V0, grid.n)
    a, b, c, d = (getattr(coeffs, k).values for k in "abcd")
    g = gamma_values(gamma, grid.n)
    y = interior_laplacian(U0, grid) + a * U0 + b * V0 + g * reference.v.values[index]
    z = interior_laplacian(V0, grid) + c * U0 + d * V0
    y[0] = y[-1] = z[0] = z[-1] = 0.0
    return y, z


def solve_difference_system(coeffs: CoefficientSet, gamma, reference: SystemTrajectory,
                            init_yz=None, tgrid: TimeGrid | None = None) -> SystemTrajectory:
    """Solve for (y, z) = d_t(u - u~, v - v~) with homogeneous Dirichlet data.

    ``coeffs`` holds the perturbed coefficient b; the source is
    gamma * d_t v~ in the first equation.
    """
    tgrid = reference.tgrid if tgrid is None else tgrid
    n = coeffs.grid.n
    if init_yz is None:
        init_yz = (np.zeros(n), np.zeros(n))
    return solve_forward(coeffs, BoundaryData.zeros(tgrid), init_yz,
                         source=difference_source(gamma, reference), tgrid=tgrid)


def solve_split(coeffs: CoefficientSet, gamma, reference: SystemTrajectory, init_yz=None,
                tgrid: TimeGrid | None = None):
    """Source-only part (zero data) and data-only part (no source)."""
    tgrid = reference.tgrid if tgrid is None else tgrid
    n = coeffs.grid.n
    zeros = (np.zeros(n), np.zeros(n))
    if init_yz is None:
        init_yz = zeros
    bc = BoundaryData.zeros(tgrid)
    sourced = solve_forward(coeffs, bc, zeros, source=difference_source(gamma, reference),
                            tgrid=tgrid)
    free = solve_forward(coeffs, bc, init_yz, source=None, tgrid=tgrid)
    return sourced, free


# -----------------------------------------------------------------------------
# hypothesis checks

@dataclass(frozen=True)
class PositivityReport:
    min_at_t_prime: float
    min_overall: float
    r: float

    @property
    def passed(self) -> bool:
        return self.min_at_t_prime >= self.r * (1.0 - 1e-6)


def check_positivity(traj: SystemTrajectory, r: float) -> PositivityReport:
    v = traj.v.values
    k = traj.tgrid.prime_index
    return PositivityReport(float(np.min(v[k])), float(np.min(v)), float(r))


@dataclass(frozen=True)
class AssumptionReport:
    checks: dict

    # the stability hypotheses; b_tilde_positive is informational
    REQUIRED = ("b_tilde_nonneg", "c_ge_c0", "c_plus_dr_nonneg", "u0_nonneg",
                "v0_ge_r", "g_nonneg", "h_ge_r", "coefficients_in_bound")

    @property
    def violations(self) -> list:
        return [k for k in self.REQUIRED if not self.checks[k]]

    @property
    def passed(self) -> bool:
        return not self.violations


def check_assumptions(coeffs: CoefficientSet, init_reference, bc: BoundaryData, r: float,
                      c0: float) -> AssumptionReport:
    """Nodewise positivity hypotheses for the reference system.

    ``coeffs.b`` is the reference coefficient b~.
    """
    n = coeffs.grid.n
    u0 = _as_values(init_reference[0], n)
    v0 = _as_values(init_reference[1], n)
    b, c, d = coeffs.b.values, coeffs.c.values, coeffs.d.values
    checks = {
        "b_tilde_nonneg": bool(np.all(b >= 0)),
        "b_tilde_positive": bool(np.all(b > 0)),
        "c_ge_c0": bool(np.all(c >= c0)),
        "c_plus_dr_nonneg": bool(np.all(c + d * r >= 0)),
        "u0_nonneg": bool(np.all(u0 >= 0)),
        "v0_ge_r": bool(np.all(v0 >= r)),
        "g_nonneg": bool(np.all(bc.g >= 0)),
        "h_ge_r": bool(np.all(bc.h >= r)),
        "coefficients_in_bound": coeffs.in_bound(),
    }
    return AssumptionReport(checks)


def l2_in_time(field_values, grid: SpatialGrid) -> np.ndarray:
    """||f(t_k)||^2_{L2} for every time row."""
    return np.array([l2_norm_sq(row, grid) for row in np.asarray(field_values)])


# -----------------------------------------------------------------------------
# binary trajectory format

MAGIC = b"RDTRAJ1"


def write_trajectory_binary(path, traj: SystemTrajectory) -> None:
    """MAGIC, uint64 n, uint64 nt+1, then float64 x, t, u, v (row-major, LE)."""
    n, m = traj.sgrid.n, traj.tgrid.nt + 1
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", n, m))
        for arr in (traj.sgrid.x, traj.tgrid.t, traj.u.values, traj.v.values):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_trajectory_binary(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError("not an RDTRAJ1 file")
    off = len(MAGIC)
    n, m = struct.unpack_from("<QQ", raw, off)
    off += 16
    data = np.frombuffer(raw, dtype="<f8", offset=off)
    x, t = data[:n], data[n:n + m]
    rest = data[n + m:]
    u = rest[: n * m].reshape(m, n)
    v = rest[n * m: 2 * n * m].reshape(m, n)
    return {"x": x, "t": t, "u": u, "v": v}
