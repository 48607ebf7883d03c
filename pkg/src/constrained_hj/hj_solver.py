"""Explicit monotone time stepping for ``u_t = H(Du) + R(x, I(t))`` with I given.

Ghost nodes copy the boundary value, so one-sided gradients vanish across
the box edge. The time step is fixed once per run from the a-priori gradient
bound ``(L + 1) T + ||Du_0||``. The Lax-Friedrichs dissipation is chosen each
step from the current one-sided gradients, so it vanishes with the spacing
even when that a-priori bound grows under refinement (a discontinuous R).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import GridFunction, Problem, SolverAbort, TimeSeries, Trajectory, lipschitz_estimate
from .hamiltonians import ALPHA_INFLATION, numerical_hamiltonian
from .reactions import ReactionField, path_bound, problem_bound

SCHEMES = ("lax_friedrichs", "godunov_quadratic")
MIN_FRAMES = 16


@dataclass(frozen=True)
class StepperParams:
    cfl: float = 0.5
    scheme: str = "lax_friedrichs"
    record_every: int = 1

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class LipschitzReport:
    t_samples: np.ndarray
    space_lip: np.ndarray
    space_bound: np.ndarray
    time_lip: float
    L: float
    K: float
    slack: float
    violations: int = field(init=False)

    def __post_init__(self):
        self.violations = int(np.sum(self.space_lip > self.space_bound + self.slack))

    @property
    def passed(self) -> bool:
        return self.violations == 0

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.space_bound + self.slack - self.space_lip))


def gradient_cap(problem: Problem) -> float:
    """A-priori Lipschitz bound ``(L + 1) T + ||Du_0||`` with L over |I| <= 2 I_max."""
    L = problem_bound(problem.reaction, problem.grid)
    return (L + 1.0) * problem.horizon + lipschitz_estimate(problem.u0)


def cfl_dt(problem: Problem, params: StepperParams, grad_cap: float) -> float:
    if grad_cap <= 0:
        raise ValueError("grad_cap must be positive")
    bound = float(np.max(problem.hamiltonian.axis_gradient_bound(grad_cap)))
    if not np.isfinite(bound):
        raise SolverAbort("the Hamiltonian's Lipschitz bound over the gradient cap is not finite")
    dt = params.cfl * problem.grid.h / (2.0 * bound + 1e-12)
    return min(dt, problem.horizon / MIN_FRAMES)


def one_sided(u: np.ndarray, spacing) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward difference quotients with coordinates on the last axis."""
    pm, pp = [], []
    for a, h in enumerate(spacing):
        d = np.diff(u, axis=a) / h
        pad = [(0, 0)] * u.ndim
        pad[a] = (1, 0)
        pm.append(np.pad(d, pad))
        pad[a] = (0, 1)
        pp.append(np.pad(d, pad))
    return np.stack(pm, axis=-1), np.stack(pp, axis=-1)


@njit(cache=True)
def _run_1d_quadratic(u0, dts, coef, shift, A, B, inv_h, inflation, godunov, abort_level, keep):
    """Whole run of the 1-D |p|^2 scheme with ``R_n = A + B * coef[n] + shift[n]``.

    Per step ``alpha = inflation * 2 max|p|``. Returns the kept frames and the
    index of the aborting step (-1 if none).
    """
    n = u0.size
    frames = np.empty((keep.sum(), n))
    u = u0.copy()
    new = np.empty(n)
    frames[0] = u
    j = 1
    for s in range(dts.size):
        dt = dts[s]
        c = coef[s]
        sh = shift[s]
        gmax = 0.0
        for i in range(n - 1):
            g = abs(u[i + 1] - u[i]) * inv_h
            if not g <= abort_level:
                return frames[:j], s
            gmax = max(gmax, g)
        half_alpha = 0.5 * max(inflation * 2.0 * gmax, 1e-12)
        for i in range(n):
            pm = (u[i] - u[i - 1]) * inv_h if i > 0 else 0.0
            pp = (u[i + 1] - u[i]) * inv_h if i < n - 1 else 0.0
            if godunov:
                a = min(pm, 0.0)
                b = max(pp, 0.0)
                hh = max(a * a, b * b)
            else:
                m = 0.5 * (pm + pp)
                hh = m * m + half_alpha * (pp - pm)
            new[i] = u[i] + dt * (hh + A[i] + B[i] * c + sh)
        u, new = new, u
        if keep[s + 1]:
            frames[j] = u
            j += 1
    return frames, -1


class Stepper:
    """Forward-Euler monotone update for one problem with a frozen time step."""

    def __init__(self, problem: Problem, params: StepperParams, grad_cap: float | None = None,
                 dt: float | None = None):
        self.problem = problem
        self.params = params
        self.grid = problem.grid
        self.grad_cap = gradient_cap(problem) if grad_cap is None else float(grad_cap)
        self.dt = cfl_dt(problem, params, self.grad_cap) if dt is None else float(dt)
        h = problem.hamiltonian
        if h.dim != self.grid.dim:
            raise ValueError("Hamiltonian and grid dimensions differ")
        self.reaction = ReactionField(problem.reaction, self.grid)
        self.abort_level = 2.0 * self.grad_cap
        self._fast = self.grid.dim == 1 and h.kind == "quadratic"
        self._god = numerical_hamiltonian(params.scheme, h) if params.scheme == "godunov_quadratic" else None
        self._h = self.grid.spacing
        self._affine = self.reaction.affine_parts() if self._fast else None

    def run(self, u: np.ndarray, times: np.ndarray, I_vals: np.ndarray, keep: np.ndarray) -> np.ndarray:
        """Advance through ``times`` with ``I_vals[n]`` on step n; return the frames where ``keep``."""
        if self._affine is None:
            frames = [u]
            for n in range(times.size - 1):
                u = self.advance(u, float(I_vals[n]), times[n + 1] - times[n])
                if keep[n + 1]:
                    frames.append(u)
            return np.stack(frames)
        A, B, coef_fn = self._affine
        clipped = [self.reaction.extension(float(I)) for I in I_vals]
        coef = np.array([coef_fn(c) for c, _ in clipped], dtype=float)
        shift = np.array([sh for _, sh in clipped], dtype=float)
        frames, bad = _run_1d_quadratic(
            np.ascontiguousarray(u, dtype=float), np.diff(times), coef, shift, A, B, 1.0 / self._h[0],
            ALPHA_INFLATION, self.params.scheme == "godunov_quadratic", self.abort_level, keep,
        )
        if bad >= 0:
            raise SolverAbort(
                f"one-sided gradient exceeds twice the a-priori bound {self.grad_cap:.6g} at step {bad}"
            )
        return frames

    def numerical_h(self, u: np.ndarray, alpha=None) -> tuple[np.ndarray, float]:
        """Ĥ at every node and the largest one-sided gradient magnitude.

        ``alpha`` overrides the per-step dissipation, e.g. to step two fields
        with one common monotone operator.
        """
        if self._fast:
            d = np.diff(u) / self._h[0]
            gmax = float(np.max(np.abs(d))) if d.size else 0.0
            pm = np.concatenate(([0.0], d))
            pp = np.concatenate((d, [0.0]))
            if self.params.scheme == "godunov_quadratic":
                hh = np.maximum(np.minimum(pm, 0.0) ** 2, np.maximum(pp, 0.0) ** 2)
            else:
                m = 0.5 * (pm + pp)
                a = self.alpha(gmax) if alpha is None else np.atleast_1d(alpha)
                hh = m * m + (0.5 * a[0]) * (pp - pm)
            return hh, gmax
        pm, pp = one_sided(u, self._h)
        gmax = float(max(np.max(np.abs(pm)), np.max(np.abs(pp))))
        if self._god is not None:
            return self._god(pm, pp), gmax
        a = self.alpha(gmax) if alpha is None else np.atleast_1d(np.asarray(alpha, dtype=float))
        return numerical_hamiltonian("lax_friedrichs", self.problem.hamiltonian, a)(pm, pp), gmax

    def alpha(self, gmax: float) -> np.ndarray:
        """Inflated bound on |dH/dp_a| over gradients of size at most ``gmax``."""
        if not gmax > 0:
            # all one-sided gradients vanish, so the dissipation term is zero anyway
            return np.full(self.grid.dim, 1e-12)
        return np.maximum(ALPHA_INFLATION * self.problem.hamiltonian.axis_gradient_bound(gmax), 1e-12)

    def advance(self, u: np.ndarray, I_value: float, dt: float, alpha=None) -> np.ndarray:
        hh, gmax = self.numerical_h(u, alpha)
        if not gmax <= self.abort_level:
            raise SolverAbort(
                f"one-sided gradient {gmax:.6g} exceeds twice the a-priori bound {self.grad_cap:.6g}"
            )
        return u + dt * (hh + self.reaction(I_value))


def step(u: GridFunction, I_value: float, dt: float, problem: Problem, params: StepperParams,
         stepper: Stepper | None = None) -> GridFunction:
    stepper = stepper or Stepper(problem, params)
    out = stepper.advance(u.values, I_value, dt)
    if not np.all(np.isfinite(out)):
        raise SolverAbort("non-finite values after a step")
    return GridFunction(u.grid, out)


def time_grid(t0: float, t_end: float, dt: float) -> np.ndarray:
    """Uniform steps of size dt from t0, last step shortened to land on t_end."""
    span = t_end - t0
    if span <= 0:
        raise ValueError("t_end must exceed t0")
    n = max(1, int(np.ceil(span / dt - 1e-9)))
    t = t0 + dt * np.arange(n + 1)
    t[-1] = t_end
    return t


def solve_given_I(problem: Problem, I_path: TimeSeries, params: StepperParams, *,
                  u_init: np.ndarray | None = None, t0: float = 0.0, t_end: float | None = None,
                  stepper: Stepper | None = None) -> Trajectory:
    """Integrate from ``t0`` to ``t_end`` (default: the horizon) with ``I = I_path(t_n)`` on step n."""
    stepper = stepper or Stepper(problem, params)
    t_end = problem.horizon if t_end is None else t_end
    times = time_grid(t0, t_end, stepper.dt)
    I_vals = np.asarray(I_path(times[:-1]), dtype=float)
    u = problem.u0.values.copy() if u_init is None else np.array(u_init, dtype=float)
    n_steps = times.size - 1
    keep = np.zeros(n_steps + 1, dtype=np.bool_)
    keep[::params.record_every] = True
    keep[-1] = True
    frames = stepper.run(u, times, I_vals, keep)
    if not np.all(np.isfinite(frames[-1])):
        raise SolverAbort("non-finite values in the trajectory")
    return Trajectory(stepper.grid, times[keep], frames)


def frame_lipschitz(traj: Trajectory) -> np.ndarray:
    grid = traj.grid
    out = np.zeros(len(traj))
    flat_axes = tuple(range(1, traj.frames.ndim))
    for a, h in enumerate(grid.spacing):
        d = np.abs(np.diff(traj.frames, axis=a + 1))
        out = np.maximum(out, d.max(axis=flat_axes) / h)
    return out


def lipschitz_monitor(traj: Trajectory, problem: Problem, L: float) -> LipschitzReport:
    """Compare the discrete Lipschitz constant of every frame with ``(L + 1) t + ||Du_0||``."""
    if len(traj) < 2:
        raise ValueError("lipschitz_monitor needs at least two frames")
    K = lipschitz_estimate(problem.u0)
    space = frame_lipschitz(traj)
    bound = (L + 1.0) * traj.times + K
    dt = np.diff(traj.times)
    du = np.abs(np.diff(traj.frames, axis=0)).reshape(dt.size, -1).max(axis=1)
    slack = 5.0 * problem.grid.h * (L + K + 1.0)
    return LipschitzReport(traj.times, space, bound, float(np.max(du / dt)), float(L), K, slack)


def path_L(problem: Problem, I_values) -> float:
    """sup_t ||R(., I(t))||_{W^{1,inf}} for the sampled multiplier values."""
    return path_bound(problem.reaction, problem.grid, I_values)


def pde_time_bound(traj: Trajectory, problem: Problem, I_values) -> float:
    """max over frames of sup H(Du) + sup |R|, the PDE bound on |u_t|."""
    h = problem.hamiltonian
    fld = ReactionField(problem.reaction, traj.grid)
    best = 0.0
    r_sup = max(float(np.max(np.abs(fld(float(I))))) for I in np.unique(I_values))
    for k in range(len(traj)):
        pm, pp = one_sided(traj.frames[k], traj.grid.spacing)
        hv = max(float(np.max(h.fn(pm))), float(np.max(h.fn(pp))))
        best = max(best, hv + r_sup)
    return best
