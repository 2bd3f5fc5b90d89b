"""Uniform space/time grids, field carriers and trapezoidal quadrature.

Everything here is one-dimensional in space: Omega = (0, L), and the time
window is (t0, T) with an even number of steps so that the midpoint
T' = (t0 + T) / 2 is a grid node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on [0, L] with ``n`` nodes (both endpoints included)."""

    length: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.length) or self.length <= 0:
            raise ConfigurationError(f"spatial length must be positive, got {self.length}")
        if int(self.n) != self.n or self.n < 3:
            raise ConfigurationError(f"node count must be an integer >= 3, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.length / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return _frozen(np.arange(self.n) * self.h)

    def refine(self) -> "SpatialGrid":
        """Nested refinement n -> 2n - 1 (halves h, keeps every old node)."""
        return SpatialGrid(self.length, 2 * self.n - 1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t0, T] with an even step count ``nt``."""

    t0: float
    T: float
    nt: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.T)) or self.t0 >= self.T:
            raise ConfigurationError(f"need t0 < T, got t0={self.t0}, T={self.T}")
        if int(self.nt) != self.nt or self.nt < 4:
            raise ConfigurationError(f"step count must be an integer >= 4, got {self.nt}")
        if int(self.nt) % 2:
            raise ConfigurationError(
                f"T' must be a grid node: step count must be even, got {self.nt}")
        object.__setattr__(self, "nt", int(self.nt))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.nt

    @property
    def t(self) -> np.ndarray:
        return _frozen(self.t0 + np.arange(self.nt + 1) * self.dt)

    @property
    def t_prime(self) -> float:
        return 0.5 * (self.t0 + self.T)

    @property
    def prime_index(self) -> int:
        return self.nt // 2

    def phi_time(self, t=None) -> np.ndarray:
        """Phi(t) = 1/((t - t0)(T - t)); +inf at the window endpoints."""
        t = self.t if t is None else np.asarray(t, dtype=float)
        denom = (t - self.t0) * (self.T - t)
        with np.errstate(divide="ignore"):
            return np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), np.inf)

    def refine(self) -> "TimeGrid":
        return TimeGrid(self.t0, self.T, 2 * self.nt)


def build_spatial_grid(length: float, n: int) -> SpatialGrid:
    return SpatialGrid(float(length), n)


def build_time_grid(t0: float, T: float, nt: int) -> TimeGrid:
    return TimeGrid(float(t0), float(T), nt)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"interval needs lo < hi, got ({self.lo}, {self.hi})")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)

    def compactly_contains(self, other: "Interval") -> bool:
        """True when closure(other) lies in the open interval self."""
        return self.lo < other.lo and other.hi < self.hi

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


@dataclass(frozen=True)
class SubIntervalSet:
    """The nested observation geometry omega' << omega'' << omega << (0, L)."""

    omega: Interval
    omega_prime: Interval
    omega_second: Interval
    length: float = 1.0

    def __post_init__(self):
        domain = Interval(0.0, self.length)
        for outer, inner, rule in (
            (domain, self.omega, "omega << Omega"),
            (self.omega, self.omega_second, "omega'' << omega"),
            (self.omega_second, self.omega_prime, "omega' << omega''"),
        ):
            if not outer.compactly_contains(inner):
                raise ConfigurationError(f"nesting rule violated: {rule}")

    @classmethod
    def from_tuples(cls, omega, omega_prime, omega_second, length=1.0) -> "SubIntervalSet":
        return cls(Interval(*omega), Interval(*omega_prime), Interval(*omega_second), length)


@dataclass(frozen=True)
class ScalarField:
    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: SpatialGrid, func) -> "ScalarField":
        return cls(grid, np.broadcast_to(func(grid.x), (grid.n,)))

    @classmethod
    def constant(cls, grid: SpatialGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n, float(value)))

    def to_csv(self, path, name: str = "value") -> None:
        write_field_csv(path, {"x": self.grid.x, name: self.values})


@dataclass(frozen=True)
class SpaceTimeField:
    """Samples on (time, space); ``values[k, i]`` is the value at (t_k, x_i)."""

    sgrid: SpatialGrid
    tgrid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        shape = (self.tgrid.nt + 1, self.sgrid.n)
        if vals.shape != shape:
            raise ValueError(f"expected shape {shape}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, sgrid: SpatialGrid, tgrid: TimeGrid, func) -> "SpaceTimeField":
        tt, xx = np.meshgrid(tgrid.t, sgrid.x, indexing="ij")
        return cls(sgrid, tgrid, np.broadcast_to(func(xx, tt), tt.shape))

    @classmethod
    def zeros(cls, sgrid: SpatialGrid, tgrid: TimeGrid) -> "SpaceTimeField":
        return cls(sgrid, tgrid, np.zeros((tgrid.nt + 1, sgrid.n)))

    def slice_at(self, k: int) -> ScalarField:
        return ScalarField(self.sgrid, self.values[k])

    def with_values(self, values) -> "SpaceTimeField":
        return SpaceTimeField(self.sgrid, self.tgrid, values)

    def to_csv(self, path, name: str = "value") -> None:
        tt, xx = np.meshgrid(self.tgrid.t, self.sgrid.x, indexing="ij")
        write_field_csv(path, {"x": xx.ravel(), "t": tt.ravel(), name: self.values.ravel()})


def format_float(value: float) -> str:
    return f"{float(value):.17g}"


def write_field_csv(path, columns: dict) -> None:
    """Write equal-length columns as CSV with 17 significant digits."""
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> dict:
    text = Path(path).read_text().splitlines()
    names = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line],
                    dtype=float).reshape(-1, len(names))
    return {name: data[:, j] for j, name in enumerate(names)}


# --------------------------------------------------------------------------
# quadrature

def space_weights(grid: SpatialGrid, region=None) -> np.ndarray:
    """Nodal weights w with sum(w * f) = integral over ``region`` of the
    piecewise-linear interpolant of f.

    On whole cells this is the composite trapezoidal rule; a cell cut by a
    region endpoint contributes the exact integral of the linear
    interpolant over the covered part.  Exact for affine f.
    """
    w = np.zeros(grid.n)
    if region is None:
        lo, hi = 0.0, grid.length
    else:
        lo, hi = (region.lo, region.hi) if isinstance(region, Interval) else region
    if lo < -1e-12 * grid.length or hi > grid.length * (1 + 1e-12):
        raise ConfigurationError(f"region ({lo}, {hi}) not inside [0, {grid.length}]")
    lo, hi = max(lo, 0.0), min(hi, grid.length)
    if hi <= lo:
        return w
    h = grid.h
    i_lo = min(int(np.floor(lo / h)), grid.n - 2)
    i_hi = max(int(np.ceil(hi / h)), i_lo + 1)
    for i in range(i_lo, i_hi):
        a = max(lo, i * h)
        b = min(hi, (i + 1) * h)
        if b <= a:
            continue
        frac_mid = (0.5 * (a + b) - i * h) / h
        w[i] += (b - a) * (1.0 - frac_mid)
        w[i + 1] += (b - a) * frac_mid
    return w


def time_weights(tgrid: TimeGrid, stop_index: int | None = None) -> np.ndarray:
    """Trapezoidal weights on t_0..t_stop (default: the whole window)."""
    stop = tgrid.nt if stop_index is None else stop_index
    w = np.zeros(tgrid.nt + 1)
    if stop <= 0:
        return w
    w[: stop + 1] = tgrid.dt
    w[0] *= 0.5
    w[stop] *= 0.5
    return w


def integrate_space(f, region=None, grid: SpatialGrid | None = None) -> float:
    """Trapezoidal integral of a ScalarField (or raw nodal array + grid)."""
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f, dtype=float)
    return float(space_weights(grid, region) @ vals)


def integrate_spacetime(f, region=None, sgrid=None, tgrid=None, stop_index=None) -> float:
    """Tensor-product trapezoidal integral over region x (t0, T).

    Values at t0 and T are used as supplied.
    """
    if isinstance(f, SpaceTimeField):
        sgrid, tgrid, vals = f.sgrid, f.tgrid, f.values
    else:
        vals = np.asarray(f, dtype=float)
    wt = time_weights(tgrid, stop_index)
    wx = space_weights(sgrid, region)
    return float(wt @ vals @ wx)


def l2_norm_sq(values, grid: SpatialGrid, region=None) -> float:
    return integrate_space(np.asarray(values) ** 2, region, grid)
