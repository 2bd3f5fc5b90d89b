"""Carleman weight geometry: the profile beta, the weights phi/eta, the cut-off xi.

The profile is the cubic

    beta_tilde(x) = x (L - x) (1 + kappa (L/2 - x)),

with kappa picked so that its single interior critical point sits at the
requested x0.  Then beta = beta_tilde + K with K = m max(beta_tilde), and

    phi(x, t) = exp(lam beta(x)) / ((t - t0)(T - t)),
    eta(x, t) = (exp(2 lam K) - exp(lam beta(x))) / ((t - t0)(T - t)).

Products exp(-2 s eta) phi**k are always formed in log space; they span
hundreds of orders of magnitude over a realistic window.

A 2-D rectangle would use the product profile beta_tilde(x) beta_tilde(y)
of two such cubics; only the interval is implemented.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigurationError, ConstructionError, DomainError
from .grid import SpatialGrid, SubIntervalSet, TimeGrid, write_field_csv

ALLOWED_POWERS = (-1, 0, 1, 3, 5, 7)


@dataclass(frozen=True)
class CarlemanConfig:
    lam: float
    s: float
    m: float
    subintervals: SubIntervalSet
    x0: float

    def __post_init__(self):
        if self.lam < 1:
            raise ConfigurationError(f"lambda must be >= 1, got {self.lam}")
        if self.s <= 1:
            raise ConfigurationError(f"s must be > 1, got {self.s}")
        if self.m <= 1:
            raise ConfigurationError(f"m must be > 1, got {self.m}")
        if not self.subintervals.omega_prime.contains(self.x0):
            raise ConfigurationError(f"x0={self.x0} must lie strictly inside omega'")


@dataclass(frozen=True)
class BetaProfile:
    """Polynomial profile beta_tilde on [0, L] plus the shift K = m max(beta_tilde)."""

    poly: Polynomial
    length: float
    m: float

    @property
    def deriv(self) -> Polynomial:
        return self.poly.deriv()

    @property
    def deriv2(self) -> Polynomial:
        return self.poly.deriv(2)

    def critical_points(self) -> np.ndarray:
        d = self.deriv.trim()
        if d.degree() < 1:
            return np.array([])
        roots = d.roots()
        roots = roots[np.abs(roots.imag) < 1e-12].real
        return np.sort(roots[(roots > 0) & (roots < self.length)])

    @property
    def max_value(self) -> float:
        cand = np.concatenate([[0.0, self.length], self.critical_points()])
        return float(np.max(self.poly(cand)))

    @property
    def K(self) -> float:
        return self.m * self.max_value

    def tilde(self, x) -> np.ndarray:
        return self.poly(np.asarray(x, dtype=float))

    def __call__(self, x) -> np.ndarray:
        """beta = beta_tilde + K."""
        return self.tilde(x) + self.K

    def gradient(self, x) -> np.ndarray:
        return self.deriv(np.asarray(x, dtype=float))

    def laplacian(self, x) -> np.ndarray:
        return self.deriv2(np.asarray(x, dtype=float))


def _cubic(length: float, kappa: float) -> Polynomial:
    center = 0.5 * length
    # x (L - x) (1 + kappa (center - x))
    return Polynomial([0.0, length, -1.0]) * Polynomial([1.0 + kappa * center, -kappa])


def build_beta(grid: SpatialGrid, subintervals: SubIntervalSet, x0: float,
               m: float) -> BetaProfile:
    """Cubic profile with its unique interior critical point at ``x0``.

    Raises ConstructionError when the tilt needed to move the critical point
    to x0 reaches |kappa| >= 1/L (x0 too far from L/2).
    """
    L = grid.length
    if m <= 1:
        raise ConfigurationError(f"m must be > 1, got {m}")
    if not subintervals.omega_prime.contains(x0):
        raise ConfigurationError(f"x0={x0} must lie strictly inside omega'")
    d = L - 2.0 * x0
    denom = L * L - 3.0 * d * d
    if denom <= 0:
        raise ConstructionError(f"no admissible tilt for x0={x0}; recenter omega'")
    kappa = 4.0 * d / denom
    if abs(kappa) >= 1.0 / L:
        raise ConstructionError(
            f"x0={x0} needs tilt kappa={kappa:.4g} with |kappa| >= 1/L; recenter omega'")
    profile = BetaProfile(_cubic(L, kappa), L, float(m))
    crit = profile.critical_points()
    if crit.size != 1 or abs(crit[0] - x0) > 1e-10 * L:
        raise ConstructionError(f"profile critical points {crit} do not match x0={x0}")
    return profile


@dataclass(frozen=True)
class BetaValidation:
    interior_positive: bool
    boundary_zero: bool
    gradient_bounded_below: bool
    min_gradient_outside: float
    endpoint_signs: bool

    @property
    def passed(self) -> bool:
        return (self.interior_positive and self.boundary_zero
                and self.gradient_bounded_below and self.endpoint_signs)


def validate_beta(profile: BetaProfile, subintervals: SubIntervalSet,
                  grid: SpatialGrid, tol: float = 1e-12) -> BetaValidation:
    """Check the four profile conditions on the grid (failures are reported)."""
    x = grid.x
    L = grid.length
    vals = profile.tilde(x)
    interior = bool(np.all(vals[1:-1] > 0))
    scale = max(1.0, float(np.max(np.abs(vals))))
    boundary = bool(abs(profile.tilde(0.0)) <= tol * scale
                    and abs(profile.tilde(L)) <= tol * scale)
    wp = subintervals.omega_prime
    outside = np.concatenate([x[(x <= wp.lo) | (x >= wp.hi)], [wp.lo, wp.hi]])
    # critical points outside omega' fall between nodes; include them exactly
    crit = profile.critical_points()
    outside = np.concatenate([outside, crit[(crit <= wp.lo) | (crit >= wp.hi)]])
    min_grad = float(np.min(np.abs(profile.gradient(outside))))
    grad_ok = min_grad > tol
    signs = bool(profile.gradient(0.0) > 0 and profile.gradient(L) < 0)
    return BetaValidation(interior, boundary, grad_ok, min_grad, signs)


@dataclass(frozen=True)
class WeightSet:
    """Weights phi, eta on the window (t0, T) for fixed lam and s.

    Construction does not enforce lam >= 1, s > 1 so the degenerate limits
    (lam = 0, s = 0) stay evaluable; CarlemanConfig carries the strict check.
    """

    beta: BetaProfile
    lam: float
    s: float
    t0: float
    T: float

    def __post_init__(self):
        if self.lam < 0 or self.s < 0:
            raise ConfigurationError("lambda and s must be nonnegative")
        if not self.t0 < self.T:
            raise ConfigurationError("need t0 < T")

    @classmethod
    def from_config(cls, config: CarlemanConfig, grid: SpatialGrid,
                    tgrid: TimeGrid) -> "WeightSet":
        beta = build_beta(grid, config.subintervals, config.x0, config.m)
        return cls(beta, config.lam, config.s, tgrid.t0, tgrid.T)

    def with_params(self, **changes) -> "WeightSet":
        return replace(self, **changes)

    # -- spatial factors ----------------------------------------------------
    def exp_lam_beta(self, x) -> np.ndarray:
        return np.exp(self.lam * self.beta(x))

    def eta_numerator(self, x) -> np.ndarray:
        """exp(2 lam K) - exp(lam beta(x)), computed without cancellation."""
        b = self.beta(x)
        return np.exp(self.lam * b) * np.expm1(self.lam * (2.0 * self.beta.K - b))

    # -- time factors ---------------------------------------------------------
    def _denominator(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t0) or np.any(t > self.T):
            raise DomainError(f"time outside [{self.t0}, {self.T}]")
        return (t - self.t0) * (self.T - t)

    def phi(self, x, t) -> np.ndarray:
        d = self._denominator(t)
        with np.errstate(divide="ignore"):
            return np.where(d > 0, self.exp_lam_beta(x) / np.where(d > 0, d, 1.0), np.inf)

    def eta(self, x, t) -> np.ndarray:
        d = self._denominator(t)
        num = self.eta_numerator(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(d > 0, num / np.where(d > 0, d, 1.0), np.inf)
        return np.where(num == 0, 0.0, out) if self.lam == 0 else out

    def log_phi(self, x, t) -> np.ndarray:
        d = self._denominator(t)
        with np.errstate(divide="ignore"):
            return self.lam * self.beta(x) - np.log(d)

    def dt_phi(self, x, t) -> np.ndarray:
        d = self._denominator(t)
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.exp_lam_beta(x) * (2.0 * t - self.t0 - self.T) / d**2

    def dt_eta(self, x, t) -> np.ndarray:
        d = self._denominator(t)
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.eta_numerator(x) * (2.0 * t - self.t0 - self.T) / d**2

    # -- log-space products ---------------------------------------------------
    def exponent(self, x, t, k: int, s: float | None = None) -> np.ndarray:
        """w_k = -2 s eta + k log(phi); -inf at t = t0 and t = T."""
        s = self.s if s is None else s
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        d = self._denominator(t)
        inside = d > 0
        dd = np.where(inside, d, 1.0)
        w = -2.0 * s * self.eta_numerator(x) / dd + k * (self.lam * self.beta(x) - np.log(dd))
        return np.where(inside, w, -np.inf)

    def weighted(self, x, t, k: int, s: float | None = None, shift: float = 0.0) -> np.ndarray:
        """exp(-2 s eta + k log(phi) - shift); exactly 0 at the window endpoints."""
        if k not in ALLOWED_POWERS:
            raise ValueError(f"power k must be one of {ALLOWED_POWERS}, got {k}")
        return np.exp(self.exponent(x, t, k, s) - shift)

    def log_scale(self, sgrid: SpatialGrid, tgrid: TimeGrid, s: float | None = None) -> float:
        """max over the grid of -2 s eta, the common shift used by all reports."""
        s = self.s if s is None else s
        if s == 0:
            return 0.0
        t_mid = tgrid.t[tgrid.prime_index]
        return float(-2.0 * s * np.min(self.eta(sgrid.x, t_mid)))

    def grid_values(self, sgrid: SpatialGrid, tgrid: TimeGrid, k: int,
                    s: float | None = None, shift: float = 0.0) -> np.ndarray:
        tt, xx = np.meshgrid(tgrid.t, sgrid.x, indexing="ij")
        return self.weighted(xx, tt, k, s, shift)

    def interior_mesh(self, sgrid: SpatialGrid, tgrid: TimeGrid):
        """(x, t) meshes restricted to interior time nodes."""
        return np.meshgrid(sgrid.x, tgrid.t[1:-1], indexing="xy")


def eval_phi(x, t, w: WeightSet):
    return w.phi(x, t)


def eval_eta(x, t, w: WeightSet):
    return w.eta(x, t)


def eval_weighted(x, t, k: int, s: float, w: WeightSet):
    return w.weighted(x, t, k, s)


def export_weights_csv(path, w: WeightSet, sgrid: SpatialGrid, tgrid: TimeGrid,
                       k: int = 3) -> None:
    tt, xx = np.meshgrid(tgrid.t, sgrid.x, indexing="ij")
    write_field_csv(path, {
        "x": xx, "t": tt, "phi": w.phi(xx, tt), "eta": w.eta(xx, tt),
        f"w_{k}": w.exponent(xx, tt, k),
    })


# -----------------------------------------------------------------------------
# cut-off

def _smoothstep(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _smoothstep_d1(tau):
    inside = (tau > 0) & (tau < 1)
    return np.where(inside, 30.0 * tau**2 * (1.0 - tau) ** 2, 0.0)


def _smoothstep_d2(tau):
    inside = (tau > 0) & (tau < 1)
    return np.where(inside, 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau), 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """C^2 cut-off: 1 on omega', quintic ramps across the gaps, 0 outside omega''."""

    subintervals: SubIntervalSet

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        wp, ws = self.subintervals.omega_prime, self.subintervals.omega_second
        left_w = wp.lo - ws.lo
        right_w = ws.hi - wp.hi
        tau_l = (x - ws.lo) / left_w
        tau_r = (ws.hi - x) / right_w
        return x, tau_l, tau_r, left_w, right_w

    def __call__(self, x) -> np.ndarray:
        x, tau_l, tau_r, _, _ = self._parts(x)
        return np.minimum(_smoothstep(tau_l), _smoothstep(tau_r))

    def derivative(self, x) -> np.ndarray:
        x, tau_l, tau_r, lw, rw = self._parts(x)
        return _smoothstep_d1(tau_l) / lw - _smoothstep_d1(tau_r) / rw

    def second_derivative(self, x) -> np.ndarray:
        x, tau_l, tau_r, lw, rw = self._parts(x)
        return _smoothstep_d2(tau_l) / lw**2 + _smoothstep_d2(tau_r) / rw**2


def build_cutoff(subintervals: SubIntervalSet) -> CutoffProfile:
    if not subintervals.omega_second.compactly_contains(subintervals.omega_prime):
        raise ConfigurationError("nesting rule violated: omega' << omega''")
    return CutoffProfile(subintervals)


# -----------------------------------------------------------------------------
# bound constants

@dataclass(frozen=True)
class WeightBoundReport:
    dt_phi: float     # |d_t phi| <= C T phi^2
    dt_eta: float     # |d_t eta| <= C T phi^2
    phi_phi3: float   # phi <= C T^4 phi^3
    phi3_phi7: float  # phi^3 <= C T^8 phi^7
    one_phi3: float   # 1 <= C T^6 phi^3

    @property
    def passed(self) -> bool:
        return all(np.isfinite(v) for v in self.as_dict().values())

    def as_dict(self) -> dict:
        return {"dt_phi": self.dt_phi, "dt_eta": self.dt_eta, "phi_phi3": self.phi_phi3,
                "phi3_phi7": self.phi3_phi7, "one_phi3": self.one_phi3}


def check_weight_bounds(w: WeightSet, sgrid: SpatialGrid, tgrid: TimeGrid) -> WeightBoundReport:
    """Smallest constants making each weight inequality hold at all interior nodes."""
    xx, tt = w.interior_mesh(sgrid, tgrid)
    T = w.T
    log_phi = w.log_phi(xx, tt)
    phi = np.exp(log_phi)
    return WeightBoundReport(
        dt_phi=float(np.max(np.abs(w.dt_phi(xx, tt)) / (T * phi**2))),
        dt_eta=float(np.max(np.abs(w.dt_eta(xx, tt)) / (T * phi**2))),
        phi_phi3=float(np.max(np.exp(-2.0 * log_phi)) / T**4),
        phi3_phi7=float(np.max(np.exp(-4.0 * log_phi)) / T**8),
        one_phi3=float(np.max(np.exp(-3.0 * log_phi)) / T**6),
    )
