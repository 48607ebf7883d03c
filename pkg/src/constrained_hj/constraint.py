"""The multiplier I(t): relaxed fixed point, the epsilon cascade, and a direct oracle.

The relaxed problem replaces ``sup_x u = 0`` by ``eps * I(t) = sup_x u(., t)``
and is solved by Picard iteration of

    Sigma(I)(t) = (1 - eps) I(t) + sup_x u(., t)

on consecutive windows of length ``2 eps / K1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .core import Problem, SolverAbort, TimeSeries, Trajectory, sup_norm_gap
from .hj_solver import Stepper, StepperParams, solve_given_I, time_grid

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)


@dataclass
class RelaxedSolution:
    epsilon: float
    I_path: TimeSeries
    trajectory: Trajectory
    fixed_point_residual: float
    iterations_per_window: list[int]
    window_ratios: list[float] = field(default_factory=list)

    @property
    def constraint_residual(self) -> float:
        return float(np.max(np.abs(self.trajectory.sup_path())))


@dataclass
class CascadeSolution:
    epsilons: tuple[float, ...]
    stages: list[RelaxedSolution]
    stage_gaps: list[float]

    @property
    def I_limit(self) -> TimeSeries:
        return self.stages[-1].I_path

    @property
    def u_limit(self) -> Trajectory:
        return self.stages[-1].trajectory

    @property
    def constraint_residual(self) -> float:
        return self.stages[-1].constraint_residual

    def stage_residuals(self) -> list[float]:
        return [s.constraint_residual for s in self.stages]


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0,1)")


def contraction_window(problem: Problem, epsilon: float) -> float:
    """T' = 2 eps / K1; undefined unless K1 > 0."""
    if not problem.K1 > 0:
        raise SolverAbort(f"contraction window T' = 2*epsilon/K1 is undefined for K1 = {problem.K1!r}")
    return 2.0 * epsilon / problem.K1


def _sigma(I_path: TimeSeries, problem: Problem, epsilon: float, params: StepperParams,
           window: tuple[float, float], u_start, stepper: Stepper, boundary: float | None):
    t0, t1 = window
    traj = solve_given_I(problem, I_path, params, u_init=u_start, t0=t0, t_end=t1, stepper=stepper)
    out = (1.0 - epsilon) * I_path(traj.times) + traj.sup_path()
    out[0] = float(I_path(t0)) if boundary is None else boundary
    return TimeSeries(traj.times, out), traj


def sigma_map(I_path: TimeSeries, problem: Problem, epsilon: float, params: StepperParams,
              window: tuple[float, float] | None = None, u_start=None, stepper: Stepper | None = None,
              boundary: float | None = None) -> TimeSeries:
    """One application of Sigma on ``window`` (default ``[0, horizon]``).

    The output is sampled at the recorded frame times. Its value at the window
    start is pinned to ``boundary`` (default ``I_path(t0)``).
    """
    _check_epsilon(epsilon)
    window = (0.0, problem.horizon) if window is None else (float(window[0]), float(window[1]))
    stepper = stepper or Stepper(problem, params)
    return _sigma(I_path, problem, epsilon, params, window, u_start, stepper, boundary)[0]


def predicted_iterations(fp_tol: float, I_max: float, epsilon: float) -> int:
    """Iterations a (1 - eps/2)-contraction needs to shrink an I_max error to fp_tol."""
    return int(math.ceil(math.log(fp_tol / I_max) / math.log(1.0 - epsilon / 2.0)))


def solve_relaxed(problem: Problem, epsilon: float, params: StepperParams | None = None,
                  fp_tol: float = 1e-8, max_iter: int = 20000, stepper: Stepper | None = None) -> RelaxedSolution:
    """Window-by-window Picard iteration of Sigma, warm-started from the last terminal I."""
    _check_epsilon(epsilon)
    if not fp_tol > 0:
        raise ValueError("fp_tol must be > 0")
    params = params or StepperParams()
    window = contraction_window(problem, epsilon)
    stepper = stepper or Stepper(problem, params)
    edges = [0.0]
    while edges[-1] + window < problem.horizon - 1e-12:
        edges.append(edges[-1] + window)
    edges.append(problem.horizon)

    u_start = problem.u0.values
    I_start = 0.0
    times, values, frames, counts, ratios = [], [], [], [], []
    for j, (t0, t1) in enumerate(zip(edges[:-1], edges[1:])):
        I_k = TimeSeries.constant(I_start, t0)
        prev_diff = None
        ratio = 0.0
        for k in range(1, max_iter + 1):
            I_next, traj = _sigma(I_k, problem, epsilon, params, (t0, t1), u_start, stepper, I_start)
            diff = float(np.max(np.abs(I_next.values - I_k(I_next.times))))
            if prev_diff is not None and prev_diff > 0:
                ratio = max(ratio, diff / prev_diff)
            if diff <= fp_tol:
                break
            prev_diff = diff
            I_k = I_next
        else:
            raise SolverAbort(
                f"fixed-point iteration did not reach fp_tol={fp_tol:g} in {max_iter} iterations "
                f"on window {j} [{t0:.6g}, {t1:.6g}] (last change {diff:.3g})"
            )
        # keep the consistent pair (I_k, u driven by I_k)
        I_vals = I_k(traj.times)
        sl = slice(0 if j == 0 else 1, None)
        times.append(traj.times[sl])
        values.append(I_vals[sl])
        frames.append(traj.frames[sl])
        counts.append(k)
        ratios.append(ratio)
        u_start = traj.frames[-1]
        I_start = float(I_vals[-1])

    t = np.concatenate(times)
    I_all = np.concatenate(values)
    full = Trajectory(problem.grid, t, np.concatenate(frames))
    residual = float(np.max(np.abs(epsilon * I_all - full.sup_path())))
    return RelaxedSolution(epsilon, TimeSeries(t, I_all), full, residual, counts, ratios)


def solve_cascade(problem: Problem, epsilons=DEFAULT_EPSILONS, params: StepperParams | None = None,
                  fp_tol: float = 1e-8, max_iter: int = 20000, stepper: Stepper | None = None) -> CascadeSolution:
    eps = tuple(float(e) for e in epsilons)
    if not eps:
        raise ValueError("epsilons must be nonempty")
    for e in eps:
        _check_epsilon(e)
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    params = params or StepperParams()
    stepper = stepper or Stepper(problem, params)
    stages = [solve_relaxed(problem, e, params, fp_tol, max_iter, stepper) for e in eps]
    gaps = [sup_norm_gap(a.I_path, b.I_path, problem.horizon) for a, b in zip(stages, stages[1:])]
    return CascadeSolution(eps, stages, gaps)


def solve_direct(problem: Problem, params: StepperParams | None = None, root_tol: float = 1e-10,
                 stepper: Stepper | None = None) -> tuple[Trajectory, TimeSeries]:
    """Per-step multiplier choice making the post-step sup vanish (implicit in I only).

    ``I_n`` acts on ``[t_n, t_{n+1}]`` and is stored at ``t_n``; the last sample
    repeats the final value at the horizon.
    """
    params = params or StepperParams()
    stepper = stepper or Stepper(problem, params)
    cap = 2.0 * problem.I_max
    times = time_grid(0.0, problem.horizon, stepper.dt)
    u = problem.u0.values.copy()
    frames = [u]
    I_vals = np.zeros(times.size)
    for n in range(times.size - 1):
        dt = times[n + 1] - times[n]
        hh, gmax = stepper.numerical_h(u)
        if not gmax <= stepper.abort_level:
            raise SolverAbort(f"one-sided gradient {gmax:.6g} exceeds twice the a-priori bound")
        base = u + dt * hh

        def g(I):
            return float(np.max(base + dt * stepper.reaction(I)))

        if g(0.0) <= 0.0:
            I_n = 0.0
        else:
            g_hi = g(cap)
            if g_hi > 0.0:
                raise SolverAbort(
                    f"bisection bracket fails at step {n}: sup after the step is {g_hi:.3g} > 0 at I = 2*I_max; "
                    "the reaction violates A1 or dt is too large"
                )
            I_n = bisect(g, 0.0, cap, xtol=root_tol, rtol=4 * np.finfo(float).eps, maxiter=400)
        I_vals[n] = I_n
        u = base + dt * stepper.reaction(I_n)
        frames.append(u)
    I_vals[-1] = I_vals[-2]
    traj = Trajectory(problem.grid, times, np.stack(frames))
    return traj, TimeSeries(times, I_vals)


@dataclass
class StabilityReport:
    t: np.ndarray
    f: np.ndarray
    integral_bound: np.ndarray
    sup_bound: np.ndarray

    def margins(self, C: float, h: float) -> tuple[np.ndarray, np.ndarray]:
        return self.integral_bound + C * h - self.f, self.sup_bound + C * h - self.f

    def required_C(self, h: float) -> float:
        """Smallest C for which both bounds hold at every frame."""
        worst = np.max(self.f - np.minimum(self.integral_bound, self.sup_bound))
        return max(0.0, float(worst) / h)


def stability_gap(traj1: Trajectory, traj2: Trajectory, I1: TimeSeries, I2: TimeSeries,
                  K1: float) -> StabilityReport:
    """f(t) = ||u1 - u2||_inf against ``K1 int_0^t |I1 - I2|`` and ``K1 t ||I1 - I2||``."""
    if traj1.grid != traj2.grid:
        raise ValueError("trajectories live on different grids")
    if traj1.times.shape != traj2.times.shape or not np.allclose(traj1.times, traj2.times, rtol=0, atol=1e-14):
        raise ValueError("trajectories have different time samples")
    t = traj1.times
    f = np.abs(traj1.frames - traj2.frames).reshape(t.size, -1).max(axis=1)
    fine = np.union1d(np.union1d(I1.times, I2.times), t)
    fine = fine[fine <= t[-1] + 1e-14]
    gap = np.abs(I1(fine) - I2(fine))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (gap[1:] + gap[:-1]) * np.diff(fine))])
    integral = K1 * np.interp(t, fine, cum)
    running = np.maximum.accumulate(gap)
    sup_b = K1 * t * np.interp(t, fine, running, left=0.0)
    return StabilityReport(t, f, integral, sup_b)
