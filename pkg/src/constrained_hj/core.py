"""Grids, grid functions, multiplier time series and the problem bundle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

if TYPE_CHECKING:
    from .hamiltonians import HamiltonianSpec
    from .reactions import ReactionSpec

TOL_SUP = 1e-12
MIN_CELLS = 8


class SolverAbort(RuntimeError):
    """A solver stopped because a numerical guard tripped."""


class ConfigError(ValueError):
    """A run configuration failed to parse or validate."""


def _as_axis_tuple(value, dim: int, kind=float) -> tuple:
    arr = np.atleast_1d(np.asarray(value))
    if arr.size == 1 and dim > 1:
        arr = np.repeat(arr, dim)
    if arr.shape != (dim,):
        raise ValueError(f"expected {dim} per-axis values, got {np.asarray(value).tolist()!r}")
    return tuple(kind(v) for v in arr)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor mesh on a box; node ``i`` sits at ``lower + i * spacing``."""

    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    n_cells: tuple[int, ...]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / n for a, b, n in zip(self.lower, self.upper, self.n_cells))

    @property
    def h(self) -> float:
        """Smallest spacing over the axes."""
        return min(self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.n_cells)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, a: int) -> np.ndarray:
        return self.lower[a] + np.arange(self.n_cells[a] + 1) * self.spacing[a]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, dim)``."""
        mesh = np.meshgrid(*(self.axis(a) for a in range(self.dim)), indexing="ij")
        return np.stack(mesh, axis=-1)

    def sample(self, fn) -> "GridFunction":
        """Evaluate ``fn`` on the node coordinates (array of shape ``(*shape, dim)``)."""
        return GridFunction(self, np.asarray(fn(self.points()), dtype=float))


def make_grid(
    dim: int, lower: float | Sequence[float], upper: float | Sequence[float], n_cells: int | Sequence[int]
) -> Grid:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    lo = _as_axis_tuple(lower, dim)
    hi = _as_axis_tuple(upper, dim)
    nc = _as_axis_tuple(n_cells, dim, kind=int)
    for a in range(dim):
        if not (math.isfinite(lo[a]) and math.isfinite(hi[a])):
            raise ValueError(f"non-finite bounds on axis {a}")
        if not lo[a] < hi[a]:
            raise ValueError(f"lower < upper violated on axis {a}")
        if nc[a] < MIN_CELLS:
            raise ValueError(f"n_cells must be >= {MIN_CELLS} on every axis, got {nc[a]}")
    return Grid(dim, lo, hi, nc)


class GridFunction:
    """Finite nodal values on a grid. The value array is read-only."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            if arr.size == grid.node_count:
                arr = arr.reshape(grid.shape)
            else:
                raise ValueError(f"value array of size {arr.size} does not match {grid.node_count} nodes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    def __repr__(self) -> str:
        return f"GridFunction(shape={self.values.shape}, max={self.values.max():.6g})"

    def shifted(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, self.values + c)

    def scaled(self, a: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * a)


def sup_value(f: GridFunction) -> float:
    return float(np.max(f.values))


def lipschitz_estimate(f: GridFunction | np.ndarray, grid: Grid | None = None) -> float:
    """Largest adjacent-node difference quotient over all axes."""
    if isinstance(f, GridFunction):
        values, grid = f.values, f.grid
    else:
        values = np.asarray(f)
    best = 0.0
    for a in range(grid.dim):
        d = np.abs(np.diff(values, axis=a))
        if d.size:
            best = max(best, float(d.max()) / grid.spacing[a])
    return best


@dataclass(frozen=True)
class TimeSeries:
    """Sampled scalar path, linear between samples and constant outside them.

    Full multiplier paths start at ``t = 0``; window-restricted pieces used by
    the fixed-point solver may start later.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if t.size == 0 or t.shape != v.shape:
            raise ValueError("times and values must be nonempty and of equal length")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing and start at t >= 0")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("time series must be finite")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float, t0: float = 0.0, t1: float | None = None) -> "TimeSeries":
        if t1 is None:
            return cls(np.array([t0]), np.array([value]))
        return cls(np.array([t0, t1]), np.array([value, value]))

    @classmethod
    def from_function(cls, fn, times) -> "TimeSeries":
        times = np.asarray(times, dtype=float)
        return cls(times, np.array([fn(t) for t in times], dtype=float))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def __len__(self) -> int:
        return self.times.size


def interp(series: TimeSeries, t: float) -> float:
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    return float(series(t))


def sup_norm_gap(a: TimeSeries, b: TimeSeries, t_max: float | None = None) -> float:
    """Exact sup of |a - b| for two piecewise-linear paths (checked at all breakpoints)."""
    t = np.union1d(a.times, b.times)
    if t_max is not None:
        t = t[t <= t_max + 1e-14]
    return float(np.max(np.abs(a(t) - b(t))))


@dataclass
class Trajectory:
    """Recorded frames of the discrete ``u``; ``frames[k]`` lives at ``times[k]``."""

    grid: Grid
    times: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.shape != (self.times.size, *self.grid.shape):
            raise ValueError("frames must have shape (n_times, *grid.shape)")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    def frame(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.frames[k])

    @property
    def final(self) -> GridFunction:
        return self.frame(-1)

    def sup_path(self) -> np.ndarray:
        return self.frames.reshape(self.times.size, -1).max(axis=1)

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time between recorded frames."""
        k = int(np.searchsorted(self.times, t))
        if k == 0:
            return self.frames[0]
        if k >= self.times.size:
            return self.frames[-1]
        t0, t1 = self.times[k - 1], self.times[k]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.frames[k - 1] + w * self.frames[k]


@dataclass(frozen=True)
class Problem:
    """Data of one constrained HJ problem; ``u0`` fixes the grid."""

    hamiltonian: "HamiltonianSpec"
    reaction: "ReactionSpec"
    u0: GridFunction
    I_max: float
    K1: float
    K2: float
    horizon: float
    assumptions_waived: bool = False
    name: str = "custom"
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for key in ("I_max", "K1", "K2", "horizon"):
            if not math.isfinite(getattr(self, key)):
                raise ValueError(f"{key} must be finite")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if self.I_max <= 0:
            raise ValueError("I_max must be > 0")
        # K1 > 0 is enforced where it is used (the contraction window), so that
        # a degenerate inline problem reaches the solver and aborts there.
        if self.K2 < 0 or self.K2 > self.K1:
            raise ValueError("constants must satisfy 0 <= K2 <= K1")
        s = sup_value(self.u0)
        if abs(s) > TOL_SUP:
            raise ValueError(f"sup of initial datum is {s!r}, must be 0 within {TOL_SUP}")

    @property
    def grid(self) -> Grid:
        return self.u0.grid


@dataclass
class Check:
    name: str
    passed: bool
    measured: float | None = None
    bound: float | None = None
    status: str | None = None

    def to_dict(self) -> dict[str, Any]:
        status = self.status or ("pass" if self.passed else "fail")
        return {"name": self.name, "pass": bool(self.passed), "status": status,
                "measured": self.measured, "bound": self.bound}


@dataclass
class ValidationReport:
    """Outcome of an assumption check; failures are recorded, never raised."""

    checks: list[Check] = field(default_factory=list)
    values: dict[str, float] = field(default_factory=dict)

    def add(self, name: str, passed: bool, measured=None, bound=None, status=None) -> Check:
        c = Check(name, bool(passed), None if measured is None else float(measured),
                  None if bound is None else float(bound), status)
        self.checks.append(c)
        return c

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
