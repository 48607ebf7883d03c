"""Canonical problem instances and the uniqueness / nonuniqueness demos."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import hamiltonians, reactions
from .constraint import solve_cascade, solve_direct
from .core import TOL_SUP, Check, GridFunction, Problem, TimeSeries, Trajectory, make_grid, sup_norm_gap
from .hj_solver import Stepper, StepperParams, lipschitz_monitor, path_L, solve_given_I
from .reactions import ReactionField

NONUNIQ_BOX = (-4.0, 4.0)
SEP_BOX = (-6.0, 6.0)


def u0_nonuniqueness(x):
    """Four-piece initial datum: flat 0 outside |x| = 2, two parabolas inside."""
    ax = np.abs(np.asarray(x, dtype=float))
    return np.where(ax >= 2.0, 0.0, np.where(ax >= 1.0, -(((ax - 2.0) / 2.0) ** 2), 0.5 * ax**2 - 0.75))


def u0_separable(x):
    x = np.asarray(x, dtype=float)
    return -np.minimum(x * x, 1.0)


def _points_1d(fn):
    return lambda P: fn(P[..., 0])


def build_nonuniqueness_problem(n_cells: int = 256, horizon: float = 0.05) -> Problem:
    grid = make_grid(1, NONUNIQ_BOX[0], NONUNIQ_BOX[1], n_cells)
    u0 = grid.sample(_points_1d(u0_nonuniqueness))
    return Problem(hamiltonians.quadratic(1), reactions.nonuniqueness_reaction(), u0,
                   I_max=1.0, K1=1.0, K2=0.5, horizon=horizon, assumptions_waived=True,
                   name="nonuniqueness_sec5", meta={"box": NONUNIQ_BOX})


def separable_reaction() -> reactions.ReactionSpec:
    """b = 1 + exp(-x^2), d = 1, Q = 1 + I, so R = exp(-x^2) - I."""
    return reactions.separable_bdq(
        reactions.gaussian_component(1.0, 1.0, 1.0), reactions.constant_component(1.0),
        reactions.affine_Q(1.0, 1.0), I_max=1.0, K1=1.0, K2=1.0, b_min=1.0, name="separable_uniqueness",
    )


def build_separable_uniqueness_problem(n_cells: int = 256, horizon: float = 0.5) -> Problem:
    grid = make_grid(1, SEP_BOX[0], SEP_BOX[1], n_cells)
    u0 = grid.sample(_points_1d(u0_separable))
    return Problem(hamiltonians.quadratic(1), separable_reaction(), u0, I_max=1.0, K1=1.0, K2=1.0,
                   horizon=horizon, name="separable_uniqueness", meta={"box": SEP_BOX, "b_min": 1.0})


def build_zero_problem(n_cells: int = 64, horizon: float = 0.1, dim: int = 1) -> Problem:
    grid = make_grid(dim, -2.0, 2.0, n_cells)
    u0 = GridFunction(grid, np.zeros(grid.shape))
    return Problem(hamiltonians.quadratic(dim), reactions.zero_reaction(), u0, I_max=1.0, K1=1.0, K2=0.0,
                   horizon=horizon, assumptions_waived=True, name="zero_sanity", meta={"box": (-2.0, 2.0)})


def _check_envelope_args(t, c):
    if not c > 0:
        raise ValueError("envelope speed c must be > 0")
    if not t >= 0:
        raise ValueError("envelope time t must be >= 0")


def matching_point_v(t: float, c: float) -> float:
    _check_envelope_args(t, c)
    disc = 1.0 - 4.0 * c * t
    if not disc > 0:
        raise ValueError("envelope_v needs 1 - 4ct > 0")
    return 2.0 - math.sqrt(disc)


def matching_point_w(t: float, c: float) -> float:
    _check_envelope_args(t, c)
    disc = 3.0 + 4.0 * c * t
    if not disc < 4:
        raise ValueError("envelope_w needs 3 + 4ct < 4")
    return 2.0 - math.sqrt(disc)


def _envelope(x, m: float, flat: float):
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.where(ax >= 2.0, 0.0, np.where(ax >= m, -(((ax - 2.0) / 2.0) ** 2), flat))
    return float(out) if out.ndim == 0 else out


def envelope_v(x, t: float, c: float):
    """Upper barrier: flat top ``-1/4 + ct`` inside ``|x| <= 2 - sqrt(1 - 4ct)``."""
    return _envelope(x, matching_point_v(t, c), -0.25 + c * t)


def envelope_w(x, t: float, c: float):
    """Lower barrier: flat bottom ``-3/4 - ct`` inside ``|x| <= 2 - sqrt(3 + 4ct)``."""
    return _envelope(x, matching_point_w(t, c), -0.75 - c * t)


def continuity_residuals(t: float, c: float) -> tuple[float, float]:
    """|flat value - parabola value| at each envelope's matching point."""
    mv, mw = matching_point_v(t, c), matching_point_w(t, c)
    rv = abs((-0.25 + c * t) + ((mv - 2.0) / 2.0) ** 2)
    rw = abs((-0.75 - c * t) + ((mw - 2.0) / 2.0) ** 2)
    return rv, rw


# demos -----------------------------------------------------------------------

SCENARIO_NAMES = ("nonuniqueness_sec5", "separable_uniqueness", "zero_sanity")
DEFAULT_BOXES = {"nonuniqueness_sec5": NONUNIQ_BOX, "separable_uniqueness": SEP_BOX, "zero_sanity": (-2.0, 2.0)}
DEFAULT_HORIZONS = {"nonuniqueness_sec5": 0.05, "separable_uniqueness": 0.5, "zero_sanity": 0.1}
SANDWICH_C = 1.0


def default_multiplier_choices(horizon: float) -> list[TimeSeries]:
    """I = 0, I = t/2 and I = min(5t, 1/2)."""
    knots = np.unique(np.array([0.0, min(0.1, horizon), horizon]))
    return [
        TimeSeries(np.array([0.0, horizon]), np.zeros(2)),
        TimeSeries(np.array([0.0, horizon]), np.array([0.0, horizon / 2])),
        TimeSeries(knots, np.minimum(5.0 * knots, 0.5)),
    ]


@dataclass
class ScenarioConfig:
    name: str = "nonuniqueness_sec5"
    box: tuple[float, float] | None = None
    resolutions: tuple[int, ...] = (256, 512, 1024)
    horizon: float | None = None
    multiplier_choices: list[TimeSeries] | None = None
    c: float = 1.0
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    fp_tol: float = 1e-8
    root_tol: float = 1e-10
    n_checkpoints: int = 21

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}")
        self.box = tuple(self.box) if self.box is not None else DEFAULT_BOXES[self.name]
        self.horizon = DEFAULT_HORIZONS[self.name] if self.horizon is None else float(self.horizon)
        self.resolutions = tuple(int(r) for r in self.resolutions)
        if not self.resolutions:
            raise ValueError("resolutions must be nonempty")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if self.name == "nonuniqueness_sec5":
            if self.horizon > 0.1:
                raise ValueError("nonuniqueness_sec5 needs horizon <= 0.1")
            if self.multiplier_choices is None:
                self.multiplier_choices = default_multiplier_choices(self.horizon)
            for k, I in enumerate(self.multiplier_choices):
                t = np.union1d(I.times, [0.0, self.horizon])
                t = t[t <= self.horizon]
                need = float(np.max(1.0 - I(t)))
                if self.c < need:
                    raise ValueError(f"multiplier choice {k} is inadmissible: c = {self.c} < sup(1 - I) = {need}")


def _validate_choices(choices: list[TimeSeries], horizon: float) -> None:
    if len(choices) < 3:
        raise ValueError("the nonuniqueness demo needs at least three multiplier choices")
    seen = []
    for k, I in enumerate(choices):
        t = np.union1d(I.times, [0.0, horizon])
        t = t[t <= horizon]
        v = I(t)
        if abs(v[0]) > 1e-14 or np.any(np.diff(v) < 0) or v.min() < 0 or v.max() > 1:
            raise ValueError(f"multiplier choice {k} must be nondecreasing with I(0) = 0 and values in [0, 1]")
        seen.append(v)
    probe = np.linspace(0.0, horizon, 101)
    samples = [I(probe) for I in choices]
    for a in range(len(samples)):
        for b in range(a):
            if np.array_equal(samples[a], samples[b]):
                raise ValueError("multiplier choices must be distinct")


def sandwich_margins(traj: Trajectory, c: float) -> tuple[float, float]:
    """Worst ``v - u`` and worst ``u - w`` over the recorded frames."""
    x = traj.grid.axis(0)
    upper = lower = math.inf
    for t, u in zip(traj.times, traj.frames):
        upper = min(upper, float(np.min(envelope_v(x, t, c) - u)))
        lower = min(lower, float(np.min(u - envelope_w(x, t, c))))
    return upper, lower


def run_nonuniqueness_demo(cfg: ScenarioConfig, params: StepperParams | None = None) -> dict:
    """Residuals, barrier margins and pairwise distinctness for each multiplier choice."""
    if cfg.name != "nonuniqueness_sec5":
        raise ValueError("run_nonuniqueness_demo needs the nonuniqueness_sec5 scenario")
    params = params or StepperParams()
    choices = cfg.multiplier_choices
    _validate_choices(choices, cfg.horizon)
    k = len(choices)
    residuals = np.zeros((len(cfg.resolutions), k))
    distinct = np.zeros((len(cfg.resolutions), k, k))
    sandwich = []
    lipschitz = []
    for r, n in enumerate(cfg.resolutions):
        problem = build_nonuniqueness_problem(n, cfg.horizon)
        stepper = Stepper(problem, params)
        trajs = [solve_given_I(problem, I, params, stepper=stepper) for I in choices]
        for a, tr in enumerate(trajs):
            residuals[r, a] = float(np.max(np.abs(tr.sup_path())))
            up, lo = sandwich_margins(tr, cfg.c)
            sandwich.append({"resolution": n, "choice": a, "upper_margin": up, "lower_margin": lo,
                             "pass": bool(min(up, lo) >= -SANDWICH_C * problem.grid.h)})
            mon = lipschitz_monitor(tr, problem, path_L(problem, choices[a](tr.times)))
            lipschitz.append({"resolution": n, "choice": a, "violations": mon.violations,
                              "worst_margin": mon.worst_margin})
            for b in range(a):
                d = float(np.max(np.abs(tr.frames - trajs[b].frames)))
                distinct[r, a, b] = distinct[r, b, a] = d

    checks = []
    first, last = 0, len(cfg.resolutions) - 1
    for a in range(k):
        # a residual already at the sup tolerance cannot shrink further in a meaningful way
        ok = residuals[last, a] <= residuals[first, a] or residuals[last, a] <= TOL_SUP
        checks.append(Check(f"residual_shrinks_choice_{a}", ok, float(residuals[last, a]),
                            float(max(residuals[first, a], TOL_SUP))))
    for a in range(k):
        for b in range(a):
            base = distinct[first, a, b]
            worst = float(distinct[:, a, b].min())
            checks.append(Check(f"distinct_{b}_{a}_persists", base > 0 and worst >= 0.5 * base, worst, 0.5 * base))
    checks.append(Check("lipschitz_bound", all(e["violations"] == 0 for e in lipschitz),
                        float(sum(e["violations"] for e in lipschitz)), 0.0))
    return {
        "scenario": cfg.name,
        "resolutions": list(cfg.resolutions),
        "constraint_residuals": residuals.tolist(),
        "distinctness": distinct.tolist(),
        "sandwich": sandwich,
        "lipschitz": lipschitz,
        "invariants": [c.to_dict() for c in checks],
    }


def _separable_parts(problem: Problem):
    field_ = ReactionField(problem.reaction, problem.grid)
    return np.asarray(field_._b, dtype=float), problem.reaction.Q


def transformed_gaps(problem: Problem, traj1: Trajectory, I1: TimeSeries, traj2: Trajectory,
                     I2: TimeSeries, checkpoints: np.ndarray) -> dict:
    """``b_m |Sigma_2 - Sigma_1|`` and ``sup |Psi_1 - Psi_2|`` with ``Sigma_i = int Q(I_i)``."""
    b, Q = _separable_parts(problem)
    b_m = problem.meta.get("b_min", problem.reaction.b_min)
    fine = np.union1d(np.union1d(I1.times, I2.times), checkpoints)
    fine = fine[fine <= problem.horizon + 1e-14]
    if not problem.reaction.kind == "separable_bdq":
        raise ValueError("transformed gaps need a separable b - d Q(I) reaction")

    def primitive(I):
        q = np.array([Q(v) for v in I(fine)])
        return np.concatenate([[0.0], np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(fine))])

    S1 = np.interp(checkpoints, fine, primitive(I1))
    S2 = np.interp(checkpoints, fine, primitive(I2))
    psi = np.array([float(np.max(np.abs((traj1.at(t) - b * s1) - (traj2.at(t) - b * s2))))
                    for t, s1, s2 in zip(checkpoints, S1, S2)])
    lhs = b_m * np.abs(S2 - S1)
    return {"t": checkpoints, "sigma_gap": np.abs(S2 - S1), "lhs": lhs, "psi_gap": psi,
            "slack": float(max(0.0, np.max(lhs - psi)))}


def run_uniqueness_demo(cfg: ScenarioConfig, params: StepperParams | None = None) -> dict:
    """Cascade against the direct solver on the refinement ladder."""
    if cfg.name != "separable_uniqueness":
        raise ValueError("run_uniqueness_demo needs the separable_uniqueness scenario")
    params = params or StepperParams()
    rows, stage_rows, lipschitz = [], [], []
    for n in cfg.resolutions:
        problem = build_separable_uniqueness_problem(n, cfg.horizon)
        stepper = Stepper(problem, params)
        casc = solve_cascade(problem, cfg.epsilons, params, cfg.fp_tol, stepper=stepper)
        d_traj, d_I = solve_direct(problem, params, cfg.root_tol, stepper=stepper)
        checkpoints = np.linspace(0.0, cfg.horizon, cfg.n_checkpoints)
        tg = transformed_gaps(problem, casc.u_limit, casc.I_limit, d_traj, d_I, checkpoints)
        stage_gaps_direct = [sup_norm_gap(s.I_path, d_I, cfg.horizon) for s in casc.stages]
        for e, g in zip(casc.epsilons, stage_gaps_direct):
            stage_rows.append({"resolution": n, "epsilon": e, "gap": g})
        for label, tr, I in (("cascade", casc.u_limit, casc.I_limit), ("direct", d_traj, d_I)):
            mon = lipschitz_monitor(tr, problem, path_L(problem, I.values))
            lipschitz.append({"resolution": n, "solver": label, "violations": mon.violations,
                              "worst_margin": mon.worst_margin})
        rows.append({
            "resolution": n,
            "I_gap": stage_gaps_direct[-1],
            "stage_gaps": casc.stage_gaps,
            "constraint_residual": casc.constraint_residual,
            "direct_residual": float(np.max(np.abs(d_traj.sup_path()))),
            "fixed_point_residuals": [s.fixed_point_residual for s in casc.stages],
            "sigma_gap_max": float(np.max(tg["sigma_gap"])),
            "psi_gap_max": float(np.max(tg["psi_gap"])),
            "slack": tg["slack"],
            "I_cascade_range": [float(casc.I_limit.values.min()), float(casc.I_limit.values.max())],
            "I_direct_range": [float(d_I.values.min()), float(d_I.values.max())],
            "I_cascade_min_increment": float(np.min(np.diff(casc.I_limit.values))),
            "I_direct_min_increment": float(np.min(np.diff(d_I.values))),
        })

    gaps = [r["I_gap"] for r in rows]
    slack0 = rows[0]["slack"]
    finest = [r for r in stage_rows if r["resolution"] == cfg.resolutions[-1]]
    checks = [
        Check("I_gap_decreases_with_resolution", all(b < a for a, b in zip(gaps, gaps[1:])), gaps[-1], gaps[0]),
        Check("I_gap_decreases_with_epsilon", all(b["gap"] < a["gap"] for a, b in zip(finest, finest[1:])),
              finest[-1]["gap"], finest[0]["gap"]),
        Check("transformed_slack_bounded", all(r["slack"] <= 2.0 * slack0 for r in rows),
              max(r["slack"] for r in rows), 2.0 * slack0),
        Check("lipschitz_bound", all(e["violations"] == 0 for e in lipschitz),
              float(sum(e["violations"] for e in lipschitz)), 0.0),
    ]
    return {"scenario": cfg.name, "resolutions": list(cfg.resolutions), "rows": rows,
            "stage_vs_direct": stage_rows, "lipschitz": lipschitz,
            "invariants": [c.to_dict() for c in checks]}


BUILDERS = {
    "nonuniqueness_sec5": build_nonuniqueness_problem,
    "separable_uniqueness": build_separable_uniqueness_problem,
    "zero_sanity": build_zero_problem,
}
