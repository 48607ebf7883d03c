"""Hamiltonians H(p) >= 0 with H(0) = 0, and monotone numerical Hamiltonians.

The evolution is written ``u_t = Ĥ(D^-u, D^+u) + R``, so a numerical
Hamiltonian is admissible when it is nondecreasing in ``p^+`` and
nonincreasing in ``p^-``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ValidationReport

ALPHA_INFLATION = 1.1


@dataclass(frozen=True)
class HamiltonianSpec:
    """``fn`` maps gradients of shape ``(..., dim)`` to values of shape ``(...)``."""

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    lipschitz_radius: float = 1.0
    lipschitz_constant: float = 2.0
    name: str = "quadratic"
    params: tuple = ()

    def __call__(self, p) -> np.ndarray:
        return self.fn(np.asarray(p, dtype=float))

    def axis_gradient_bound(self, radius: float, points: int = 201) -> np.ndarray:
        """Per-axis bound on |dH/dp_a| over the cube ``|p_a| <= radius``."""
        if self.kind == "quadratic":
            return np.full(self.dim, 2.0 * radius)
        return _sampled_gradient_bound(self, radius, points)


def _lattice(dim: int, radius: float, per_axis: int) -> tuple[np.ndarray, float]:
    if per_axis % 2 == 0:
        per_axis += 1
    ax = np.linspace(-radius, radius, per_axis)
    mesh = np.meshgrid(*([ax] * dim), indexing="ij")
    return np.stack(mesh, axis=-1), float(ax[1] - ax[0])


def _sampled_gradient_bound(h: HamiltonianSpec, radius: float, points: int) -> np.ndarray:
    per_axis = points if h.dim == 1 else max(41, int(math.sqrt(points * 20)))
    P, step = _lattice(h.dim, radius, per_axis)
    delta = 1e-3 * step
    out = np.zeros(h.dim)
    for a in range(h.dim):
        e = np.zeros(h.dim)
        e[a] = delta
        g = (h.fn(P + e) - h.fn(P - e)) / (2 * delta)
        # central differences miss the slope across a kink between lattice points
        slope = np.abs(np.diff(h.fn(P), axis=a)) / step
        out[a] = max(float(np.max(np.abs(g))), float(np.max(slope)))
    return out


def _quadratic(p: np.ndarray) -> np.ndarray:
    return np.sum(p * p, axis=-1)


def quadratic(dim: int = 1, lipschitz_radius: float = 1.0) -> HamiltonianSpec:
    """``H(p) = |p|^2``."""
    return HamiltonianSpec("quadratic", _quadratic, dim, lipschitz_radius, 2.0 * lipschitz_radius, "quadratic")


def custom(fn, dim: int = 1, lipschitz_radius: float = 1.0, lipschitz_constant: float = 1.0,
           name: str = "custom", params: tuple = ()) -> HamiltonianSpec:
    return HamiltonianSpec("custom", fn, dim, lipschitz_radius, lipschitz_constant, name, params)


def from_form(form: str, dim: int = 1, scale: float = 1.0, exponent: float = 2.0,
              lipschitz_radius: float = 1.0) -> HamiltonianSpec:
    """Named Hamiltonian families accepted by the run config."""
    if form == "quadratic":
        if scale == 1.0:
            return quadratic(dim, lipschitz_radius)
        return custom(lambda p: scale * _quadratic(p), dim, lipschitz_radius,
                      2.0 * scale * lipschitz_radius, "scaled_quadratic", (scale,))
    if form == "abs":
        return custom(lambda p: scale * np.sqrt(_quadratic(p)), dim, lipschitz_radius, scale, "abs", (scale,))
    if form == "power":
        if exponent < 1:
            raise ValueError("power Hamiltonian needs exponent >= 1 to be locally Lipschitz")
        const = scale * exponent * lipschitz_radius ** (exponent - 1)
        return custom(lambda p: scale * _quadratic(p) ** (exponent / 2), dim, lipschitz_radius, const,
                      "power", (scale, exponent))
    if form == "zero":
        return custom(lambda p: np.zeros(np.shape(p)[:-1]), dim, lipschitz_radius, 0.0, "zero")
    raise ValueError(f"unknown Hamiltonian form {form!r}")


def eval_H(h: HamiltonianSpec, p) -> float | np.ndarray:
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("gradient must be finite")
    if p.ndim == 0:
        p = p.reshape(1)
    out = h.fn(p)
    return float(out) if np.ndim(out) == 0 else out


def validate_H1(h: HamiltonianSpec, box_radius: float, samples: int = 1000) -> ValidationReport:
    """Sample nonnegativity, ``H(0) = 0`` and the declared Lipschitz constant on a cube."""
    if box_radius <= 0 or samples < 1000:
        raise ValueError("validate_H1 needs box_radius > 0 and samples >= 1000")
    per_axis = samples if h.dim == 1 else int(math.ceil(samples ** (1.0 / h.dim)))
    P, step = _lattice(h.dim, box_radius, per_axis)
    H = h.fn(P)
    rep = ValidationReport()
    rep.add("H_nonnegative", H.min() >= -1e-12, H.min(), -1e-12)
    h0 = abs(float(h.fn(np.zeros(h.dim))))
    rep.add("H_zero_at_origin", h0 <= 1e-12, h0, 1e-12)
    lip = max(float(np.max(np.abs(np.diff(H, axis=a)))) / step for a in range(h.dim))
    bound = h.lipschitz_constant * 1.01
    rep.add("H_local_lipschitz", lip <= bound, lip, bound)
    rep.values["empirical_lipschitz"] = lip
    return rep


def lax_friedrichs(h: HamiltonianSpec, p_minus, p_plus, alpha) -> float | np.ndarray:
    """``H((p^- + p^+)/2) + sum_a alpha_a/2 (p^+_a - p^-_a)``."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive on every axis")
    pm = np.atleast_1d(np.asarray(p_minus, dtype=float))
    pp = np.atleast_1d(np.asarray(p_plus, dtype=float))
    out = h.fn(0.5 * (pm + pp)) + np.sum(0.5 * alpha * (pp - pm), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def godunov_quadratic_1d(p_minus, p_plus):
    """Exact Godunov value of ``p^2`` for ``u_t = p^2 + R``.

    Equals the max of ``p^2`` over ``[p^-, p^+]`` when ``p^- <= p^+`` and the
    min over ``[p^+, p^-]`` otherwise.
    """
    out = np.maximum(np.minimum(p_minus, 0.0) ** 2, np.maximum(p_plus, 0.0) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def numerical_hamiltonian(scheme: str, h: HamiltonianSpec, alpha=None):
    """Vectorised ``(p^-, p^+) -> Ĥ`` for arrays of shape ``(..., dim)``."""
    if scheme == "godunov_quadratic":
        if h.kind != "quadratic":
            raise ValueError("godunov_quadratic requires the quadratic Hamiltonian")
        # |p|^2 is separable, so the Godunov value is the per-axis sum
        return lambda pm, pp: np.sum(np.maximum(np.minimum(pm, 0.0) ** 2, np.maximum(pp, 0.0) ** 2), axis=-1)
    if scheme == "lax_friedrichs":
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (h.dim,) or np.any(alpha <= 0):
            raise ValueError("lax_friedrichs needs a positive alpha per axis")
        half = 0.5 * alpha
        fn = h.fn
        return lambda pm, pp: fn(0.5 * (pm + pp)) + np.sum(half * (pp - pm), axis=-1)
    raise ValueError(f"unknown scheme {scheme!r}")
