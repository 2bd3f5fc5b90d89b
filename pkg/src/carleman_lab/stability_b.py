"""Observation operator, the T' snapshot identity, the Lipschitz stability
ratio for the coefficient b, and two reconstructions of b from synthetic data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ReconstructionError
from .grid import (Interval, ScalarField, SpatialGrid, TimeGrid, format_float, l2_norm_sq,
                   space_weights, time_weights)
from .operators import discrete_laplacian, time_derivative_array
from .scenario import MAX_MODES, Scenario, ScenarioSpec
from .solver import SystemTrajectory, difference_initial_data, solve_difference_system

DEGENERATE = 1e-300


@dataclass(frozen=True)
class ObservationSet:
    """d_t v on the node cover of omega over the window, plus T' snapshots."""

    sgrid: SpatialGrid
    tgrid: TimeGrid
    omega: Interval
    omega_nodes: np.ndarray
    dt_v_omega: np.ndarray = field(repr=False)
    u_Tp: np.ndarray = field(repr=False)
    v_Tp: np.ndarray = field(repr=False)
    lap_u_Tp: np.ndarray = field(repr=False)
    dt_u_Tp: np.ndarray | None = field(default=None, repr=False)

    def omega_weights(self) -> np.ndarray:
        return space_weights(self.sgrid, self.omega)[self.omega_nodes]

    def with_noise(self, level: float, seed: int = 0, fields=("u_Tp", "v_Tp", "lap_u_Tp",
                                                               "dt_u_Tp")) -> "ObservationSet":
        """Copy with N(0, level^2) noise on the named snapshot arrays.

        Boundary entries are prescribed Dirichlet data and stay exact.
        """
        rng = np.random.default_rng(seed)
        changes = {}
        for name in fields:
            arr = getattr(self, name)
            if arr is not None:
                noise = level * rng.standard_normal(arr.shape)
                noise[..., 0] = noise[..., -1] = 0.0
                changes[name] = arr + noise
        return _replace_obs(self, **changes)

    def vector(self) -> np.ndarray:
        """Observations flattened with square-root quadrature weights, so that
        ||vec(o1) - vec(o2)||^2 is the sum of the four squared L2 misfits."""
        wt = np.sqrt(time_weights(self.tgrid))
        wo = np.sqrt(self.omega_weights())
        wx = np.sqrt(space_weights(self.sgrid))
        return np.concatenate([
            (wt[:, None] * self.dt_v_omega * wo[None, :]).ravel(),
            wx * self.lap_u_Tp, wx * self.u_Tp, wx * self.v_Tp,
        ])


def _replace_obs(obs: ObservationSet, **changes) -> ObservationSet:
    from dataclasses import replace
    return replace(obs, **changes)


def omega_cover(grid: SpatialGrid, omega: Interval) -> np.ndarray:
    """Indices of the smallest node-aligned cover of omega."""
    return np.nonzero(space_weights(grid, omega) > 0)[0]


def extract_observations(traj: SystemTrajectory, omega, with_dt_u: bool = False) -> ObservationSet:
    sgrid, tgrid = traj.sgrid, traj.tgrid
    omega = omega if isinstance(omega, Interval) else Interval(*omega)
    if not Interval(0.0, sgrid.length).compactly_contains(omega):
        raise ConfigurationError(f"omega {omega.as_tuple()} must lie inside Omega")
    nodes = omega_cover(sgrid, omega)
    k = tgrid.prime_index
    dt_v = time_derivative_array(traj.v.values, tgrid)
    u = traj.u.values
    dt_u = time_derivative_array(u, tgrid)[k].copy() if with_dt_u else None
    return ObservationSet(
        sgrid, tgrid, omega, nodes,
        dt_v_omega=dt_v[:, nodes].copy(),
        u_Tp=u[k].copy(), v_Tp=traj.v.values[k].copy(),
        lap_u_Tp=discrete_laplacian(u[k], sgrid),
        dt_u_Tp=dt_u,
    )


# -----------------------------------------------------------------------------
# snapshot identity

@dataclass(frozen=True)
class IdentityResidual:
    residual: np.ndarray
    norm: float
    y_norm: float

    @property
    def relative(self) -> float:
        return self.norm / self.y_norm if self.y_norm > 0 else 0.0


def snapshot_identity_residual(scenario: Scenario, via: str = "system") -> IdentityResidual:
    """y(T') - [lap U + a U + b V + gamma v~](T') on the grid.

    ``via="system"`` takes y from the difference system; ``via="fd"``
    takes the time derivative of u - u~.
    """
    ref = scenario.solve_reference()
    tgt = scenario.solve_target()
    coeffs = scenario.target_coeffs
    k = scenario.tgrid.prime_index
    U = tgt.u.values - ref.u.values
    V = tgt.v.values - ref.v.values
    if via == "system":
        y0, z0 = difference_initial_data(coeffs, scenario.gamma, ref, U[0], V[0], 0)
        y = solve_difference_system(coeffs, scenario.gamma, ref, (y0, z0)).u.values[k]
    elif via == "fd":
        y = time_derivative_array(U, scenario.tgrid)[k]
    else:
        raise ValueError(f"unknown route {via!r}")
    rhs, _ = difference_initial_data(coeffs, scenario.gamma, ref, U[k], V[k], k)
    res = y - rhs
    grid = scenario.sgrid
    return IdentityResidual(res, float(np.sqrt(l2_norm_sq(res, grid))),
                            float(np.sqrt(l2_norm_sq(y, grid))))


# -----------------------------------------------------------------------------
# Lipschitz stability ratio

@dataclass(frozen=True)
class StabilityReport:
    eps: float
    lhs: float
    obs_term: float
    lap_term: float
    u_term: float
    v_term: float

    @property
    def denominator(self) -> float:
        return self.obs_term + self.lap_term + self.u_term + self.v_term

    @property
    def degenerate(self) -> bool:
        return self.denominator < DEGENERATE

    @property
    def ratio(self) -> float:
        return float("nan") if self.degenerate else self.lhs / self.denominator

    @property
    def flag(self) -> str:
        return "degenerate" if self.degenerate else "ok"

    CSV_HEADER = "eps,lhs,obs_term,lap_term,u_term,v_term,ratio,flag"

    def csv_row(self) -> str:
        nums = (self.eps, self.lhs, self.obs_term, self.lap_term, self.u_term, self.v_term,
                self.ratio)
        return ",".join(format_float(v) for v in nums) + "," + self.flag


def stability_report(obs: ObservationSet, obs_ref: ObservationSet, gamma, eps: float = 0.0
                     ) -> StabilityReport:
    grid = obs.sgrid
    gam = gamma.values if isinstance(gamma, ScalarField) else np.asarray(gamma, float)
    wt = time_weights(obs.tgrid)
    wo = obs.omega_weights()
    dv = obs.dt_v_omega - obs_ref.dt_v_omega
    return StabilityReport(
        eps=float(eps),
        lhs=l2_norm_sq(gam, grid),
        obs_term=float(wt @ dv**2 @ wo),
        lap_term=l2_norm_sq(obs.lap_u_Tp - obs_ref.lap_u_Tp, grid),
        u_term=l2_norm_sq(obs.u_Tp - obs_ref.u_Tp, grid),
        v_term=l2_norm_sq(obs.v_Tp - obs_ref.v_Tp, grid),
    )


def snapshot_dominated(reports, fraction: float = 0.01) -> list:
    """Reports whose three T' snapshot terms together are at most ``fraction``
    of the observation term, i.e. where d_t v on omega alone carries the data."""
    return [r for r in reports
            if r.obs_term > 0 and r.lap_term + r.u_term + r.v_term <= fraction * r.obs_term]


class RejectedScenario(ConfigurationError):
    def __init__(self, causes):
        super().__init__("scenario rejected: " + ", ".join(causes))
        self.causes = list(causes)


def stability_experiment(spec: ScenarioSpec, eps_list, sgrid: SpatialGrid, tgrid: TimeGrid
                         ) -> list[StabilityReport]:
    """One report per eps with gamma_eps = eps * spec.gamma."""
    base = spec.materialize(sgrid, tgrid)
    report = base.check()
    if not report.passed:
        raise RejectedScenario(report.violations)
    ref = base.solve_reference()
    obs_ref = extract_observations(ref, base.omega)
    out = []
    for eps in eps_list:
        sc = spec.with_gamma(spec.gamma.scaled(eps)).materialize(sgrid, tgrid)
        if not sc.target_in_bound():
            raise RejectedScenario([f"b = b~ + gamma leaves Lambda(R) at eps={eps}"])
        obs = extract_observations(sc.solve_target(), sc.omega)
        out.append(stability_report(obs, obs_ref, sc.gamma, eps))
    return out


# -----------------------------------------------------------------------------
# reconstruction

def reconstruct_b_direct(obs: ObservationSet, obs_ref: ObservationSet, a, b_tilde,
                         r_floor: float) -> ScalarField:
    """Pointwise inversion of the T' identity (needs d_t u(T') in ``obs``).

    gamma = [d_t U - lap U - a U - b~ V] / v   at T'.
    """
    if obs.dt_u_Tp is None or obs_ref.dt_u_Tp is None:
        raise ReconstructionError("direct reconstruction needs d_t u(T') in both data sets")
    grid = obs.sgrid
    a = a.values if isinstance(a, ScalarField) else np.asarray(a, float)
    bt = b_tilde.values if isinstance(b_tilde, ScalarField) else np.asarray(b_tilde, float)
    v = obs.v_Tp
    bad = np.nonzero(np.abs(v) < r_floor)[0]
    if bad.size:
        i = int(bad[0])
        raise ReconstructionError(
            f"|v(T', x)| = {abs(v[i]):.3g} below floor {r_floor} at node {i} (x={grid.x[i]:.6g})",
            node=i)
    U = obs.u_Tp - obs_ref.u_Tp
    V = obs.v_Tp - obs_ref.v_Tp
    num = (obs.dt_u_Tp - obs_ref.dt_u_Tp) - (obs.lap_u_Tp - obs_ref.lap_u_Tp) - a * U - bt * V
    return ScalarField(grid, bt + num / v)


@dataclass(frozen=True)
class LsqResult:
    b_hat: ScalarField
    coefficients: np.ndarray
    converged: bool
    iterations: int
    objective: float
    grad_norm: float
    history: tuple = ()


def sine_basis(grid: SpatialGrid, n_modes: int) -> np.ndarray:
    j = np.arange(1, n_modes + 1)
    return np.sin(np.pi * np.outer(grid.x, j) / grid.length)


def reconstruct_b_lsq(obs: ObservationSet, obs_ref: ObservationSet, model: Scenario,
                      alpha: float, budget: int = 20, n_modes: int = MAX_MODES,
                      grad_tol: float = 1e-8, fd_step: float = 1e-4) -> LsqResult:
    """Tikhonov-regularized Gauss-Newton fit of gamma in a sine span.

    Minimizes ||[O(b~ + gamma) - O~] - [obs - obs_ref]||^2 + alpha ||gamma||^2
    where O is solve-then-extract on ``model`` (its a, c, d, boundary and
    target initial data) and O~ is the model run at b~ with the reference
    initial data.  The Jacobian is by central differences.
    """
    if alpha <= 0:
        raise ConfigurationError(f"regularization weight must be positive, got {alpha}")
    if not 1 <= n_modes <= MAX_MODES:
        raise ConfigurationError(f"mode count must be in 1..{MAX_MODES}")
    grid = model.sgrid
    basis = sine_basis(grid, n_modes)
    b_tilde = model.reference_coeffs.b.values
    sqrt_w = np.sqrt(space_weights(grid))
    reg_op = np.sqrt(alpha) * sqrt_w[:, None] * basis

    def forward(coef):
        traj = model.solve_with_b(b_tilde + basis @ coef)
        return extract_observations(traj, model.omega).vector()

    model_ref = extract_observations(model.solve_with_b(b_tilde, init=model.init_ref),
                                     model.omega).vector()
    target = obs.vector() - obs_ref.vector()

    def residual(coef):
        return forward(coef) - model_ref - target

    coef = np.zeros(n_modes)
    r = residual(coef)
    history = []
    converged = False
    it = 0
    grad_norm = np.inf
    while True:
        jac = np.empty((r.size, n_modes))
        for j in range(n_modes):
            e = np.zeros(n_modes)
            e[j] = fd_step
            jac[:, j] = (residual(coef + e) - residual(coef - e)) / (2 * fd_step)
        reg = reg_op @ coef
        grad = 2.0 * (jac.T @ r + reg_op.T @ reg)
        grad_norm = float(np.linalg.norm(grad))
        objective = float(r @ r + reg @ reg)
        history.append(objective)
        if grad_norm <= grad_tol:
            converged = True
            break
        if it >= budget:
            break
        A = np.vstack([jac, reg_op])
        rhs = -np.concatenate([r, reg])
        step, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        coef = coef + step
        r = residual(coef)
        it += 1
    return LsqResult(ScalarField(grid, b_tilde + basis @ coef), coef, converged, it,
                     history[-1], grad_norm, tuple(history))
