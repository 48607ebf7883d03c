"""Selection-mutation reaction-diffusion model and its Hopf-Cole transform.

    n_t - eps * Lap(n) = (n / eps) * R(x, I_eps(t)),   I_eps(t) = int psi(x) n(x, t) dx

``u_eps = eps * log(n)`` is compared against the constrained HJ solution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import trapezoid

from .constraint import DEFAULT_EPSILONS, solve_cascade
from .core import Grid, GridFunction, Problem, SolverAbort, TimeSeries, sup_norm_gap
from .hj_solver import StepperParams
from .reactions import ReactionField, ReactionSpec

DENSITY_FLOOR = 1e-30
DT_SAFETY = 0.9
RD_EPSILONS = (0.4, 0.2, 0.1, 0.05)


def default_kernel(grid: Grid) -> GridFunction:
    """``max(0, 1 - |x/2|^2)^2`` normalised to unit integral on the box."""
    r2 = np.sum(grid.points() ** 2, axis=-1) / 4.0
    psi = np.maximum(0.0, 1.0 - r2) ** 2
    return GridFunction(grid, psi / _integrate(psi, grid))


def _integrate(values: np.ndarray, grid: Grid) -> float:
    out = np.asarray(values, dtype=float)
    for a in reversed(range(grid.dim)):
        out = trapezoid(out, dx=grid.spacing[a], axis=a)
    return float(out)


@dataclass(frozen=True)
class RDState:
    grid: Grid
    density: GridFunction
    epsilon: float
    kernel: GridFunction
    t: float = 0.0
    clip_mass: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if np.any(self.density.values < 0):
            raise ValueError("density must be nonnegative")
        k = self.kernel.values
        if np.any(k < 0):
            raise ValueError("kernel must be nonnegative")
        edge = [np.take(k, i, axis=a) for a in range(self.grid.dim) for i in (0, -1)]
        if any(np.any(e > 0) for e in edge):
            raise ValueError("kernel support must lie inside the box")


def initial_state(u0: GridFunction, epsilon: float, kernel: GridFunction | None = None) -> RDState:
    """``n = exp(u0 / eps)``."""
    n = np.exp(u0.values / epsilon)
    return RDState(u0.grid, GridFunction(u0.grid, n), epsilon, kernel or default_kernel(u0.grid))


def consumption(state: RDState) -> float:
    return _integrate(state.kernel.values * state.density.values, state.grid)


def total_mass(state: RDState) -> float:
    return _integrate(state.density.values, state.grid)


def laplacian(n: np.ndarray, grid: Grid) -> np.ndarray:
    """Second differences with copy-out ghost nodes."""
    out = np.zeros_like(n)
    for a, h in enumerate(grid.spacing):
        padded = np.concatenate([np.take(n, [0], axis=a), n, np.take(n, [-1], axis=a)], axis=a)
        lo = np.take(padded, np.arange(0, n.shape[a]), axis=a)
        hi = np.take(padded, np.arange(2, n.shape[a] + 2), axis=a)
        out += (lo - 2.0 * n + hi) / (h * h)
    return out


def max_stable_dt(grid: Grid, epsilon: float, sup_R: float) -> float:
    diffusion = grid.h**2 / (2.0 * grid.dim * epsilon)
    if sup_R <= 0:
        return diffusion
    return min(diffusion, epsilon / (2.0 * sup_R))


def rd_step(state: RDState, reaction: ReactionSpec | ReactionField, dt: float) -> RDState:
    """One explicit step; negative values are clipped and the removed mass recorded."""
    field_ = reaction if isinstance(reaction, ReactionField) else ReactionField(reaction, state.grid)
    I = consumption(state)
    R = np.asarray(field_(I))
    limit = max_stable_dt(state.grid, state.epsilon, float(np.max(np.abs(R))))
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.6g} exceeds the stability limit {limit:.6g}")
    n = state.density.values
    eps = state.epsilon
    new = n + dt * (eps * laplacian(n, state.grid) + (n / eps) * R)
    if not np.all(np.isfinite(new)):
        raise SolverAbort("non-finite density after a reaction-diffusion step")
    neg = np.minimum(new, 0.0)
    clip = -_integrate(neg, state.grid)
    new = np.maximum(new, 0.0)
    return replace(state, density=GridFunction(state.grid, new), t=state.t + dt, clip_mass=clip)


def hopf_cole(state: RDState, floor: float = DENSITY_FLOOR) -> GridFunction:
    if not floor > 0:
        raise ValueError("floor must be > 0")
    return GridFunction(state.grid, state.epsilon * np.log(np.maximum(state.density.values, floor)))


@dataclass
class RDRun:
    epsilon: float
    times: np.ndarray
    u: np.ndarray
    I: np.ndarray
    max_clip_fraction: float
    steps: int


def run_rd(problem: Problem, epsilon: float, horizon: float, checkpoints: np.ndarray,
           kernel: GridFunction | None = None) -> RDRun:
    """Evolve from ``exp(u0/eps)`` and record the Hopf-Cole transform at the checkpoints."""
    grid = problem.grid
    field_ = ReactionField(problem.reaction, grid)
    sup_R = max(float(np.max(np.abs(field_(I)))) for I in np.linspace(0.0, 2.0 * problem.I_max, 33))
    dt = DT_SAFETY * max_stable_dt(grid, epsilon, sup_R)
    state = initial_state(problem.u0, epsilon, kernel)
    us, Is = [hopf_cole(state).values], [consumption(state)]
    worst_clip = 0.0
    steps = 0
    for t_next in checkpoints[1:]:
        while state.t < t_next - 1e-14:
            h = min(dt, t_next - state.t)
            mass = total_mass(state)
            state = rd_step(state, field_, h)
            if mass > 0:
                worst_clip = max(worst_clip, state.clip_mass / mass)
            steps += 1
        state = replace(state, t=float(t_next))
        us.append(hopf_cole(state).values)
        Is.append(consumption(state))
    return RDRun(epsilon, np.asarray(checkpoints), np.stack(us), np.array(Is), worst_clip, steps)


def compare_limits(problem: Problem, epsilons=RD_EPSILONS, params: StepperParams | None = None,
                   horizon: float | None = None, n_checkpoints: int = 11, hj_epsilons=DEFAULT_EPSILONS,
                   fp_tol: float = 1e-8, window_level: float = -1.0) -> dict:
    """gap(eps) = max over checkpoints of ``|u_RD - u_HJ|`` on ``{u_HJ >= window_level}``."""
    if problem.hamiltonian.kind != "quadratic":
        raise ValueError("compare_limits needs the quadratic Hamiltonian")
    horizon = problem.horizon if horizon is None else float(horizon)
    if horizon != problem.horizon:
        problem = replace(problem, horizon=horizon)
    params = params or StepperParams()
    casc = solve_cascade(problem, hj_epsilons, params, fp_tol)
    checkpoints = np.linspace(0.0, horizon, n_checkpoints)
    u_hj = np.stack([casc.u_limit.at(t) for t in checkpoints])
    mask = u_hj >= window_level
    I_hj = casc.I_limit
    rows = []
    for eps in epsilons:
        run = run_rd(problem, float(eps), horizon, checkpoints)
        diff = np.where(mask, np.abs(run.u - u_hj), 0.0)
        sup_rd = run.u.reshape(len(checkpoints), -1).max(axis=1)
        rows.append({
            "epsilon": float(eps),
            "gap": float(diff.max()),
            "I_gap": sup_norm_gap(TimeSeries(checkpoints, run.I), I_hj, horizon),
            "sup_u_rd": float(np.max(np.abs(sup_rd))),
            "max_clip_fraction": run.max_clip_fraction,
            "steps": run.steps,
        })
    return {"rows": rows, "hj_constraint_residual": casc.constraint_residual, "checkpoints": checkpoints.tolist()}
