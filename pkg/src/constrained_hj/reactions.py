"""Reaction terms R(x, I), their extension beyond |I| <= 2 I_max, and assumption checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Grid, ValidationReport, lipschitz_estimate

KINDS = ("separable_bdq", "separable_bqd", "nonuniqueness_sec5", "custom")
DELTA_I = 1e-5

Component = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction data. ``b``/``d`` take points ``(..., dim)``; ``Q`` and ``native`` take ``I``.

    ``native(x, I)`` is only used by the ``custom`` kind.
    """

    kind: str
    I_max: float
    declared_K1: float
    declared_K2: float
    b: Component | None = None
    d: Component | None = None
    Q: Callable[[float], float] | None = None
    b_min: float | None = None
    native: Callable[[np.ndarray, float], np.ndarray] | None = None
    name: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reaction kind {self.kind!r}")
        if self.kind.startswith("separable") and (self.b is None or self.d is None or self.Q is None):
            raise ValueError("separable reactions need b, d and Q")
        if self.kind == "custom" and self.native is None:
            raise ValueError("custom reactions need a native callable")


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))


def _native(r: ReactionSpec, x: np.ndarray, I: float) -> np.ndarray:
    if r.kind == "separable_bdq":
        return r.b(x) - r.d(x) * r.Q(I)
    if r.kind == "separable_bqd":
        return r.b(x) * r.Q(I) - r.d(x)
    if r.kind == "nonuniqueness_sec5":
        ax = _norm(x)
        return np.where(ax < 0.5, (1.0 - ax) * (1.0 - I), 0.0)
    return np.asarray(r.native(x, I), dtype=float)


def eval_R(r: ReactionSpec, x, I: float) -> np.ndarray | float:
    """R(x, I) with the affine continuation of slope -1 outside ``[-2 I_max, 2 I_max]``.

    ``x`` is a single point (a scalar in 1-D, or a coordinate vector) or an
    array of points with coordinates on the last axis.
    """
    I = float(I)
    x = np.asarray(x, dtype=float)
    if not (math.isfinite(I) and np.all(np.isfinite(x))):
        raise ValueError("eval_R needs finite x and I")
    scalar = x.ndim <= 1
    if scalar:
        x = x.reshape(1, -1)
    cap = 2.0 * r.I_max
    if I > cap:
        out = _native(r, x, cap) - I + cap
    elif I < -cap:
        out = _native(r, x, -cap) - cap - I
    else:
        out = _native(r, x, I)
    out = np.asarray(out, dtype=float)
    if scalar:
        return float(out.ravel()[0])
    return out


class ReactionField:
    """R(., I) on a fixed grid; separable kinds cache b and d at the nodes."""

    def __init__(self, r: ReactionSpec, grid: Grid):
        self.r = r
        self.grid = grid
        self.points = grid.points()
        if r.kind.startswith("separable"):
            self._b = np.broadcast_to(np.asarray(r.b(self.points), dtype=float), grid.shape)
            self._d = np.broadcast_to(np.asarray(r.d(self.points), dtype=float), grid.shape)
        else:
            self._b = self._d = None

    def _native(self, I: float) -> np.ndarray:
        r = self.r
        if r.kind == "separable_bdq":
            return self._b - self._d * r.Q(I)
        if r.kind == "separable_bqd":
            return self._b * r.Q(I) - self._d
        return np.broadcast_to(_native(r, self.points, I), self.grid.shape)

    def affine_parts(self):
        """``(A, B, coef)`` with ``R(., I) = A + B * coef(I)`` for ``|I| <= 2 I_max``, or None."""
        r = self.r
        if r.kind == "separable_bdq":
            return np.asarray(self._b, dtype=float), -np.asarray(self._d, dtype=float), r.Q
        if r.kind == "separable_bqd":
            return -np.asarray(self._d, dtype=float), np.asarray(self._b, dtype=float), r.Q
        if r.kind == "nonuniqueness_sec5":
            weight = np.broadcast_to(_native(r, self.points, 0.0), self.grid.shape)
            return np.zeros(self.grid.shape), np.array(weight, dtype=float), lambda I: 1.0 - I
        return None

    def extension(self, I: float) -> tuple[float, float]:
        """(clipped I, additive shift) realising the continuation beyond ``2 I_max``."""
        cap = 2.0 * self.r.I_max
        if I > cap:
            return cap, cap - I
        if I < -cap:
            return -cap, -cap - I
        return I, 0.0

    def __call__(self, I: float) -> np.ndarray:
        cap = 2.0 * self.r.I_max
        if I > cap:
            return self._native(cap) - I + cap
        if I < -cap:
            return self._native(-cap) - cap - I
        return self._native(I)


def w1inf_bound(r: ReactionSpec, grid: Grid, I_values) -> tuple[float, float, float]:
    """(max sup|R|, max Lip_x R, max of their sum) over the given I values on the grid."""
    field_ = ReactionField(r, grid)
    sup_abs = lip = total = 0.0
    for I in np.unique(np.asarray(I_values, dtype=float)):
        R = np.asarray(field_(float(I)))
        a = float(np.max(np.abs(R)))
        l = lipschitz_estimate(R, grid)
        sup_abs, lip, total = max(sup_abs, a), max(lip, l), max(total, a + l)
    return sup_abs, lip, total


def path_bound(r: ReactionSpec, grid: Grid, values, max_samples: int = 257) -> float:
    """sup_t ||R(., I(t))||_{W^{1,inf}} along a sampled multiplier path."""
    v = np.unique(np.asarray(values, dtype=float))
    if v.size > max_samples:
        v = np.unique(np.concatenate([v[np.linspace(0, v.size - 1, max_samples).astype(int)], [v[0], v[-1]]]))
    return w1inf_bound(r, grid, v)[2]


def problem_bound(r: ReactionSpec, grid: Grid, samples: int = 65) -> float:
    """The W^{1,inf} bound on R over |I| <= 2 I_max."""
    return w1inf_bound(r, grid, np.linspace(-2 * r.I_max, 2 * r.I_max, samples))[2]


def validate_assumptions(r: ReactionSpec, grid: Grid, I_samples: int = 64) -> ValidationReport:
    if I_samples < 64:
        raise ValueError("validate_assumptions needs I_samples >= 64")
    fld = ReactionField(r, grid)
    cap = 2.0 * r.I_max
    Is = np.linspace(-cap + DELTA_I, cap - DELTA_I, I_samples)
    rep = ValidationReport()

    slopes = np.stack([(fld(I + DELTA_I) - fld(I - DELTA_I)) / (2 * DELTA_I) for I in Is])
    lo, hi = float(slopes.min()), float(slopes.max())
    a1_lo, a1_hi = -1.01 * r.declared_K1, -0.99 * r.declared_K2
    passed = r.declared_K2 > 0 and lo >= a1_lo and hi <= a1_hi
    if lo < a1_lo and hi <= a1_hi:
        rep.add("A1", passed, lo, a1_lo)
    else:
        rep.add("A1", passed, hi, a1_hi)
    rep.values.update(R_I_min=lo, R_I_max=hi)

    sup_abs, lip_x, L = w1inf_bound(r, grid, np.concatenate([Is, [0.0, r.I_max]]))
    tol_A = max(1e-8, 2.0 * grid.h * lip_x)
    a2 = float(np.max(fld(r.I_max)))
    a3 = float(np.min(fld(0.0)))
    rep.add("A2", abs(a2) <= tol_A, a2, tol_A)
    rep.add("A3", abs(a3) <= tol_A, a3, tol_A)
    rep.add("A4", math.isfinite(L), L, None)
    rep.values.update(L=L, lip_x=lip_x, sup_abs=sup_abs, tol_A=tol_A)

    if r.kind.startswith("separable"):
        Iq = np.linspace(0.0, cap, 4 * I_samples)
        q = np.array([r.Q(I) for I in Iq])
        dq = np.diff(q)
        mono = bool(np.all(dq >= 0)) if r.kind == "separable_bdq" else bool(np.all(dq <= 0))
        rep.add("Q_positive_monotone", bool(np.all(q > 0)) and mono, float(q.min()), 0.0)
        bvals = np.asarray(r.b(fld.points))
        bmin = -math.inf if r.b_min is None else r.b_min
        rep.add("b_above_b_min", r.b_min is not None and r.b_min > 0 and float(bvals.min()) > bmin,
                float(bvals.min()), bmin)
    return rep


# component families for separable reactions ---------------------------------


def constant_component(value: float) -> Component:
    return lambda x: np.full(np.shape(x)[:-1], float(value))


def gaussian_component(offset: float = 0.0, amplitude: float = 1.0, width: float = 1.0) -> Component:
    """``offset + amplitude * exp(-|x|^2 / width^2)``."""
    return lambda x: offset + amplitude * np.exp(-np.sum(np.asarray(x) ** 2, axis=-1) / width**2)


def affine_Q(intercept: float = 1.0, slope: float = 1.0):
    return lambda I: intercept + slope * I


def component_from_config(cfg: dict) -> Component:
    form = cfg.get("form")
    if form == "constant":
        return constant_component(cfg["value"])
    if form == "gaussian":
        return gaussian_component(cfg.get("offset", 0.0), cfg.get("amplitude", 1.0), cfg.get("width", 1.0))
    raise ValueError(f"unknown component form {form!r}")


def separable_bdq(b: Component, d: Component, Q, I_max: float, K1: float, K2: float,
                  b_min: float | None, name: str = "separable_bdq", params: dict | None = None) -> ReactionSpec:
    return ReactionSpec("separable_bdq", I_max, K1, K2, b=b, d=d, Q=Q, b_min=b_min, name=name,
                        params=params or {})


def separable_bqd(b: Component, d: Component, Q, I_max: float, K1: float, K2: float,
                  b_min: float | None, name: str = "separable_bqd", params: dict | None = None) -> ReactionSpec:
    return ReactionSpec("separable_bqd", I_max, K1, K2, b=b, d=d, Q=Q, b_min=b_min, name=name,
                        params=params or {})


def nonuniqueness_reaction() -> ReactionSpec:
    """(1 - |x|)(1 - I) on |x| < 1/2 and 0 elsewhere; not strictly decreasing in I."""
    return ReactionSpec("nonuniqueness_sec5", I_max=1.0, declared_K1=1.0, declared_K2=0.5,
                        name="nonuniqueness_sec5")


def custom_reaction(native, I_max: float, K1: float, K2: float, name: str = "custom",
                    params: dict | None = None) -> ReactionSpec:
    return ReactionSpec("custom", I_max, K1, K2, native=native, name=name, params=params or {})


def zero_reaction(I_max: float = 1.0, K1: float = 1.0) -> ReactionSpec:
    return custom_reaction(lambda x, I: np.zeros(np.shape(x)[:-1]), I_max, K1, 0.0, name="zero")


def linear_decay_reaction(rate: float = 1.0, I_max: float = 1.0) -> ReactionSpec:
    """x-free ``R(I) = -rate * I``."""
    return custom_reaction(lambda x, I: np.full(np.shape(x)[:-1], -rate * I), I_max, rate, rate,
                           name="linear_decay", params={"rate": rate})
