"""Grid-independent scenario descriptions built from short sine series.

Coefficients, perturbations and initial data are all of the form
``offset + sum_j amp_j sin(j pi x / L)`` with at most eight modes, so a
scenario can be materialized on any grid (needed for refinement checks)
and every field lies in every Sobolev class the estimates ask for.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .grid import Interval, ScalarField, SpatialGrid, TimeGrid
from .solver import (AssumptionReport, BoundaryData, CoefficientSet, SystemTrajectory,
                     check_assumptions, solve_forward)

MAX_MODES = 8


@dataclass(frozen=True)
class SineSeries:
    offset: float = 0.0
    amplitudes: tuple = ()

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        if len(amps) > MAX_MODES:
            raise ConfigurationError(f"at most {MAX_MODES} sine modes allowed, got {len(amps)}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "offset", float(self.offset))

    def __call__(self, x, length: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.offset)
        for j, amp in enumerate(self.amplitudes, start=1):
            if amp:
                out = out + amp * np.sin(j * np.pi * x / length)
        return out

    def on(self, grid: SpatialGrid) -> np.ndarray:
        return self(grid.x, grid.length)

    def scaled(self, factor: float) -> "SineSeries":
        return SineSeries(factor * self.offset, tuple(factor * a for a in self.amplitudes))

    def __add__(self, other: "SineSeries") -> "SineSeries":
        n = max(len(self.amplitudes), len(other.amplitudes))
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.amplitudes)] = self.amplitudes
        b[: len(other.amplitudes)] = other.amplitudes
        return SineSeries(self.offset + other.offset, tuple(a + b))

    def sup_bound(self) -> float:
        return abs(self.offset) + float(np.sum(np.abs(self.amplitudes)))


def constant(value: float) -> SineSeries:
    return SineSeries(value)


def modes(*amps: float, offset: float = 0.0) -> SineSeries:
    return SineSeries(offset, tuple(amps))


@dataclass(frozen=True)
class ScenarioSpec:
    """A pair of systems sharing a, c, d and the boundary data.

    The reference system uses b~ = ``b_tilde`` and initial data
    (``u0_ref``, ``v0_ref``); the target uses b = b~ + ``gamma`` and
    (``u0``, ``v0``).  When ``u0``/``v0`` are None they copy the reference.
    """

    a: SineSeries = field(default_factory=SineSeries)
    b_tilde: SineSeries = field(default_factory=SineSeries)
    c: SineSeries = field(default_factory=SineSeries)
    d: SineSeries = field(default_factory=SineSeries)
    gamma: SineSeries = field(default_factory=SineSeries)
    u0_ref: SineSeries = field(default_factory=SineSeries)
    v0_ref: SineSeries = field(default_factory=SineSeries)
    u0: SineSeries | None = None
    v0: SineSeries | None = None
    g: float = 0.0
    h: float = 0.0
    R: float = 10.0
    r: float = 1.0
    c0: float = 1.0
    omega: tuple = (0.3, 0.7)

    def __post_init__(self):
        for name, bc in (("u0_ref", self.g), ("v0_ref", self.h), ("u0", self.g), ("v0", self.h)):
            series = getattr(self, name)
            if series is not None and abs(series.offset - bc) > 1e-12 * (1 + abs(bc)):
                raise ConfigurationError(
                    f"{name} offset {series.offset} must equal its boundary value {bc}")

    @property
    def target_u0(self) -> SineSeries:
        return self.u0_ref if self.u0 is None else self.u0

    @property
    def target_v0(self) -> SineSeries:
        return self.v0_ref if self.v0 is None else self.v0

    def with_gamma(self, gamma: SineSeries) -> "ScenarioSpec":
        return replace(self, gamma=gamma)

    def with_initial_perturbation(self, du0: SineSeries, dv0: SineSeries) -> "ScenarioSpec":
        return replace(self, u0=self.u0_ref + du0, v0=self.v0_ref + dv0)

    def materialize(self, sgrid: SpatialGrid, tgrid: TimeGrid) -> "Scenario":
        return Scenario(self, sgrid, tgrid)


class Scenario:
    """A ScenarioSpec sampled on concrete grids, with cached solves."""

    def __init__(self, spec: ScenarioSpec, sgrid: SpatialGrid, tgrid: TimeGrid):
        self.spec = spec
        self.sgrid = sgrid
        self.tgrid = tgrid
        self.omega = Interval(*spec.omega)
        if not Interval(0.0, sgrid.length).compactly_contains(self.omega):
            raise ConfigurationError("omega must lie inside Omega")
        on = lambda s: s.on(sgrid)  # noqa: E731
        self.reference_coeffs = CoefficientSet(
            *(ScalarField(sgrid, on(getattr(spec, k))) for k in ("a", "b_tilde", "c", "d")),
            R=spec.R)
        self.gamma = on(spec.gamma)
        self.target_coeffs = self.reference_coeffs.with_b(self.reference_coeffs.b.values + self.gamma)
        self.bc = BoundaryData.constant(tgrid, spec.g, spec.h)
        self.init_ref = (on(spec.u0_ref), on(spec.v0_ref))
        self.init = (on(spec.target_u0), on(spec.target_v0))
        self._reference = None
        self._target = None

    def check(self) -> AssumptionReport:
        return check_assumptions(self.reference_coeffs, self.init_ref, self.bc,
                                 self.spec.r, self.spec.c0)

    def target_in_bound(self) -> bool:
        return self.target_coeffs.in_bound()

    def solve_reference(self) -> SystemTrajectory:
        if self._reference is None:
            self._reference = solve_forward(self.reference_coeffs, self.bc, self.init_ref,
                                            tgrid=self.tgrid)
        return self._reference

    def solve_target(self) -> SystemTrajectory:
        if self._target is None:
            self._target = solve_forward(self.target_coeffs, self.bc, self.init, tgrid=self.tgrid)
        return self._target

    def solve_with_b(self, b_values, init=None) -> SystemTrajectory:
        coeffs = self.reference_coeffs.with_b(b_values)
        return solve_forward(coeffs, self.bc, self.init if init is None else init,
                             tgrid=self.tgrid, check_bound=False, check_conditioning=False)

    def refined(self) -> "Scenario":
        return Scenario(self.spec, self.sgrid.refine(), self.tgrid.refine())


def assumption_scenario(gamma_eps: float = 0.0, variant: int = 0, **overrides) -> ScenarioSpec:
    """Reference scenarios satisfying the positivity hypotheses (r = c0 = 1).

    variant 0: constant coefficients, v~0 = r + sin(pi x)
    variant 1: x-dependent a and b~, two-mode initial data
    variant 2: stronger coupling, damped first component

    All three keep d >= 0: with d < 0 the discrete (and continuum) v~ can
    drop below r even though c + d r >= 0 holds.
    """
    base = dict(g=0.0, h=1.0, r=1.0, c0=1.0, R=10.0, omega=(0.3, 0.7))
    if variant == 0:
        base.update(a=constant(0.0), b_tilde=constant(1.0), c=constant(1.0), d=constant(0.0),
                    u0_ref=modes(0.5), v0_ref=modes(1.0, offset=1.0))
    elif variant == 1:
        base.update(a=modes(0.3, offset=-0.2), b_tilde=modes(0.0, 0.2, offset=0.5),
                    c=modes(0.5, offset=1.0), d=constant(0.3),
                    u0_ref=modes(0.4, 0.0, 0.1), v0_ref=modes(0.8, 0.0, 0.2, offset=1.0))
    elif variant == 2:
        base.update(a=constant(-1.0), b_tilde=constant(2.0), c=constant(2.0), d=constant(0.0),
                    u0_ref=modes(1.0), v0_ref=modes(0.5, 0.0, 0.1, offset=1.0))
    else:
        raise ValueError(f"unknown variant {variant}")
    base["gamma"] = modes(gamma_eps)
    base.update(overrides)
    return ScenarioSpec(**base)
