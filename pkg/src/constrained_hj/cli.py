"""JSON-configured command line front end.

    python3 -m constrained_hj CONFIG.json [--output-dir DIR]

Exit codes: 0 success, 1 invariant failure, 2 solver abort, 3 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import hamiltonians, reactions, scenarios
from .constraint import DEFAULT_EPSILONS, solve_cascade, solve_direct, solve_relaxed
from .core import Check, ConfigError, Problem, SolverAbort, TimeSeries, Trajectory, make_grid
from .hj_solver import SCHEMES, StepperParams, gradient_cap, lipschitz_monitor, path_L, solve_given_I
from .rd_limit import RD_EPSILONS, compare_limits

EXIT_OK, EXIT_INVARIANT, EXIT_ABORT, EXIT_CONFIG = 0, 1, 2, 3

COMMANDS = ("solve-given-i", "solve-relaxed", "solve-cascade", "solve-direct", "demo-nonuniqueness",
            "demo-uniqueness", "demo-rd-limit", "validate")
DEFAULT_SCENARIO = {"demo-nonuniqueness": "nonuniqueness_sec5"}


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathConfig(Strict):
    times: list[float]
    values: list[float]

    def series(self) -> TimeSeries:
        try:
            return TimeSeries(np.array(self.times), np.array(self.values))
        except ValueError as exc:
            raise ConfigError(f"invalid multiplier path: {exc}") from exc


class ScenarioModel(Strict):
    name: Literal["nonuniqueness_sec5", "separable_uniqueness", "zero_sanity"]
    resolutions: list[int] = Field(default_factory=lambda: [256, 512, 1024])
    horizon: Optional[float] = None
    c: float = 1.0
    multiplier_choices: Optional[list[PathConfig]] = None

    @field_validator("resolutions")
    @classmethod
    def _res(cls, v):
        if not v:
            raise ValueError("resolutions must be nonempty")
        if any(r < 8 for r in v):
            raise ValueError("every resolution must be >= 8")
        return v


class ComponentModel(Strict):
    form: Literal["constant", "gaussian"]
    value: float = 1.0
    offset: float = 0.0
    amplitude: float = 1.0
    width: float = 1.0


class QModel(Strict):
    intercept: float = 1.0
    slope: float = 1.0


class ReactionModel(Strict):
    kind: Literal["separable_bdq", "separable_bqd", "nonuniqueness_sec5", "zero", "linear_decay"]
    b: Optional[ComponentModel] = None
    d: Optional[ComponentModel] = None
    Q: Optional[QModel] = None
    b_min: Optional[float] = None
    rate: float = 1.0


class HamiltonianModel(Strict):
    form: Literal["quadratic", "abs", "power", "zero"] = "quadratic"
    scale: float = 1.0
    exponent: float = 2.0


class InitialDatumModel(Strict):
    form: Literal["zero", "neg_min_square", "nonuniqueness", "neg_quadratic"] = "neg_min_square"
    scale: float = 1.0


class ProblemModel(Strict):
    dim: Literal[1, 2] = 1
    lower: float = -6.0
    upper: float = 6.0
    n_cells: int = 256
    hamiltonian: HamiltonianModel = Field(default_factory=HamiltonianModel)
    reaction: ReactionModel
    u0: InitialDatumModel = Field(default_factory=InitialDatumModel)
    horizon: float = 0.5
    I_max: float = 1.0
    K1: float = 1.0
    K2: float = 1.0
    assumptions_waived: bool = False


class EmitModel(Strict):
    frames: bool = False
    i_path: bool = True
    report: bool = True
    plotdata: bool = False


class RunConfig(Strict):
    command: Literal[COMMANDS]  # type: ignore[valid-type]
    output_dir: str = "out"
    scenario: Optional[ScenarioModel] = None
    problem: Optional[ProblemModel] = None
    resolution: Optional[int] = None
    epsilon: float = 0.05
    epsilons: list[float] = Field(default_factory=lambda: list(DEFAULT_EPSILONS))
    rd_epsilons: list[float] = Field(default_factory=lambda: list(RD_EPSILONS))
    rd_resolution: int = 512
    I_path: Optional[PathConfig] = None
    cfl: float = 0.5
    scheme: Literal[SCHEMES] = "lax_friedrichs"  # type: ignore[valid-type]
    record_every: int = 1
    fp_tol: float = 1e-8
    root_tol: float = 1e-10
    max_iter: int = 20000
    emit: EmitModel = Field(default_factory=EmitModel)

    @field_validator("epsilon")
    @classmethod
    def _eps(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("epsilon must lie in (0,1)")
        return v

    @field_validator("epsilons", "rd_epsilons")
    @classmethod
    def _eps_list(cls, v):
        if not v:
            raise ValueError("epsilon lists must be nonempty")
        if any(not 0.0 < e < 1.0 for e in v):
            raise ValueError("every epsilon must lie in (0,1)")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        return v

    @field_validator("fp_tol", "root_tol")
    @classmethod
    def _tol(cls, v):
        if not v > 0:
            raise ValueError("tolerances must be > 0")
        return v

    @field_validator("cfl")
    @classmethod
    def _cfl(cls, v):
        if not 0.0 < v <= 1.0:
            raise ValueError("cfl must lie in (0,1]")
        return v

    @field_validator("record_every", "max_iter")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @model_validator(mode="after")
    def _fill(self):
        if self.scenario is not None and self.problem is not None:
            raise ValueError("give either scenario or problem, not both")
        if self.scenario is None and self.problem is None:
            self.scenario = ScenarioModel(name=DEFAULT_SCENARIO.get(self.command, "separable_uniqueness"))
        return self

    def stepper_params(self) -> StepperParams:
        return StepperParams(self.cfl, self.scheme, self.record_every)

    def scenario_config(self) -> scenarios.ScenarioConfig:
        s = self.scenario
        choices = None if s.multiplier_choices is None else [p.series() for p in s.multiplier_choices]
        try:
            return scenarios.ScenarioConfig(name=s.name, resolutions=tuple(s.resolutions), horizon=s.horizon,
                                            multiplier_choices=choices, c=s.c, epsilons=tuple(self.epsilons),
                                            fp_tol=self.fp_tol, root_tol=self.root_tol)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _format_pydantic(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {loc!r}"
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def parse_config(data: Any) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_pydantic(exc)) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


# problem construction ----------------------------------------------------------


def _u0_fn(model: InitialDatumModel):
    a = model.scale
    if model.form == "zero":
        return lambda P: np.zeros(P.shape[:-1])
    if model.form == "nonuniqueness":
        return lambda P: scenarios.u0_nonuniqueness(np.sqrt(np.sum(P**2, axis=-1)))
    if model.form == "neg_quadratic":
        return lambda P: -a * np.sum(P**2, axis=-1)
    return lambda P: -np.minimum(a * np.sum(P**2, axis=-1), 1.0)


def _reaction(model: ReactionModel, p: ProblemModel) -> reactions.ReactionSpec:
    if model.kind in ("separable_bdq", "separable_bqd"):
        if model.b is None or model.d is None:
            raise ConfigError(f"reaction kind {model.kind} needs components b and d")
        q = model.Q or QModel()
        build = reactions.separable_bdq if model.kind == "separable_bdq" else reactions.separable_bqd
        return build(reactions.component_from_config(model.b.model_dump()),
                     reactions.component_from_config(model.d.model_dump()),
                     reactions.affine_Q(q.intercept, q.slope), p.I_max, p.K1, p.K2, model.b_min)
    if model.kind == "nonuniqueness_sec5":
        return reactions.nonuniqueness_reaction()
    if model.kind == "zero":
        return reactions.custom_reaction(lambda x, I: np.zeros(np.shape(x)[:-1]), p.I_max, p.K1, p.K2, name="zero")
    return reactions.custom_reaction(lambda x, I: np.full(np.shape(x)[:-1], -model.rate * I), p.I_max,
                                     p.K1, p.K2, name="linear_decay", params={"rate": model.rate})


def inline_problem(model: ProblemModel) -> Problem:
    try:
        grid = make_grid(model.dim, model.lower, model.upper, model.n_cells)
        u0 = grid.sample(_u0_fn(model.u0))
        h = hamiltonians.from_form(model.hamiltonian.form, model.dim, model.hamiltonian.scale,
                                   model.hamiltonian.exponent)
        return Problem(h, _reaction(model.reaction, model), u0, model.I_max, model.K1, model.K2, model.horizon,
                       model.assumptions_waived, name="inline",
                       meta={"box": (model.lower, model.upper), "b_min": model.reaction.b_min})
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid inline problem: {exc}") from exc


def build_problem(cfg: RunConfig, resolution: int | None = None) -> Problem:
    if cfg.problem is not None:
        return inline_problem(cfg.problem)
    s = cfg.scenario
    n = resolution or cfg.resolution or s.resolutions[0]
    builder = scenarios.BUILDERS[s.name]
    kwargs = {"n_cells": n}
    if s.horizon is not None:
        kwargs["horizon"] = s.horizon
    try:
        return builder(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# writers -----------------------------------------------------------------------


def fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_i_path(path: Path, series: TimeSeries) -> None:
    write_csv(path, ["t", "I"], zip(series.times, series.values))


def write_frames(path: Path, traj: Trajectory) -> None:
    grid = traj.grid
    pts = grid.points().reshape(-1, grid.dim)
    header = ["t", "x"] if grid.dim == 1 else ["t", "x", "y"]
    header.append("u")

    def rows():
        for t, f in zip(traj.times, traj.frames):
            for p, u in zip(pts, f.ravel()):
                yield (t, *p, u)

    write_csv(path, header, rows())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


# command bodies ------------------------------------------------------------------


class Outcome:
    def __init__(self):
        self.invariants: list[Check] = []
        self.residuals: dict[str, Any] = {}
        self.extra: dict[str, Any] = {}

    def check(self, name, passed, measured=None, bound=None, status=None):
        self.invariants.append(Check(name, bool(passed), None if measured is None else float(measured),
                                     None if bound is None else float(bound), status))


def _multiplier_checks(out: Outcome, label: str, I: TimeSeries, problem: Problem, slack_mono: float,
                       slack_upper: float) -> None:
    v = I.values
    inc = float(np.min(np.diff(v))) if v.size > 1 else 0.0
    out.check(f"{label}_nondecreasing", inc >= -slack_mono, inc, -slack_mono)
    if not problem.assumptions_waived:
        out.check(f"{label}_lower_bound", v.min() >= -slack_mono, v.min(), -slack_mono)
        out.check(f"{label}_upper_bound", v.max() <= problem.I_max + slack_upper, v.max(),
                  problem.I_max + slack_upper)


def _lipschitz_check(out: Outcome, label: str, traj: Trajectory, problem: Problem, I_values) -> None:
    mon = lipschitz_monitor(traj, problem, path_L(problem, I_values))
    out.check(f"{label}_lipschitz_bound", mon.passed, mon.violations, 0)
    out.residuals[f"{label}_time_lip"] = mon.time_lip


def _emit_traj(cfg: RunConfig, out_dir: Path, traj: Trajectory, I: TimeSeries | None) -> None:
    if cfg.emit.i_path and I is not None:
        write_i_path(out_dir / "i_path.csv", I)
    if cfg.emit.frames:
        write_frames(out_dir / "frames.csv", traj)
    if cfg.emit.plotdata:
        write_csv(out_dir / "plot_sup.csv", ["t", "sup_u"], zip(traj.times, traj.sup_path()))


def cmd_solve_given_i(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    problem = build_problem(cfg)
    params = cfg.stepper_params()
    I = cfg.I_path.series() if cfg.I_path is not None else TimeSeries.constant(0.0, 0.0, problem.horizon)
    traj = solve_given_I(problem, I, params)
    sampled = TimeSeries(traj.times, I(traj.times))
    out.residuals["constraint_residual"] = float(np.max(np.abs(traj.sup_path())))
    out.check("finite", bool(np.all(np.isfinite(traj.frames))))
    _lipschitz_check(out, "u", traj, problem, sampled.values)
    _emit_traj(cfg, out_dir, traj, sampled)


def _relaxed_checks(out, label, sol, problem, fp_tol):
    bound = fp_tol / (sol.epsilon / 2.0)
    out.check(f"{label}_fixed_point_residual", sol.fixed_point_residual <= bound, sol.fixed_point_residual, bound)
    out.check(f"{label}_starts_at_zero", sol.I_path.values[0] == 0.0, sol.I_path.values[0], 0.0)
    h = problem.grid.h
    _multiplier_checks(out, label, sol.I_path, problem, 10 * fp_tol, 10 * fp_tol + h)


def cmd_solve_relaxed(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    problem = build_problem(cfg)
    sol = solve_relaxed(problem, cfg.epsilon, cfg.stepper_params(), cfg.fp_tol, cfg.max_iter)
    out.residuals.update(fixed_point_residual=sol.fixed_point_residual,
                         constraint_residual=sol.constraint_residual,
                         iterations_per_window=sol.iterations_per_window)
    _relaxed_checks(out, "I", sol, problem, cfg.fp_tol)
    _lipschitz_check(out, "u", sol.trajectory, problem, sol.I_path.values)
    _emit_traj(cfg, out_dir, sol.trajectory, sol.I_path)


def cmd_solve_cascade(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    problem = build_problem(cfg)
    casc = solve_cascade(problem, cfg.epsilons, cfg.stepper_params(), cfg.fp_tol, cfg.max_iter)
    for s in casc.stages:
        _relaxed_checks(out, f"eps_{s.epsilon:g}", s, problem, cfg.fp_tol)
    gaps = casc.stage_gaps
    out.check("stage_gaps_finite", all(math.isfinite(g) for g in gaps))
    out.check("stage_gaps_decreasing", all(b < a for a, b in zip(gaps, gaps[1:])),
              gaps[-1] if gaps else None, gaps[0] if gaps else None)
    _lipschitz_check(out, "u", casc.u_limit, problem, casc.I_limit.values)
    out.residuals.update(constraint_residual=casc.constraint_residual, stage_gaps=gaps,
                         stage_residuals=casc.stage_residuals())
    write_csv(out_dir / "gaps.csv", ["epsilon", "gap", "residual"],
              [(e, math.nan if k == 0 else gaps[k - 1], s.constraint_residual)
               for k, (e, s) in enumerate(zip(casc.epsilons, casc.stages))])
    _emit_traj(cfg, out_dir, casc.u_limit, casc.I_limit)


def cmd_solve_direct(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    problem = build_problem(cfg)
    traj, I = solve_direct(problem, cfg.stepper_params(), cfg.root_tol)
    res = float(np.max(np.abs(traj.sup_path())))
    out.residuals["constraint_residual"] = res
    out.check("constraint_residual", res <= cfg.root_tol, res, cfg.root_tol)
    _multiplier_checks(out, "I", I, problem, cfg.root_tol, cfg.root_tol + problem.grid.h)
    _lipschitz_check(out, "u", traj, problem, I.values)
    _emit_traj(cfg, out_dir, traj, I)


def _absorb(out: Outcome, report: dict) -> None:
    for c in report.pop("invariants"):
        out.invariants.append(Check(c["name"], c["pass"], c["measured"], c["bound"], c["status"]))
    out.extra.update(report)


def cmd_demo_nonuniqueness(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    if cfg.problem is not None or cfg.scenario.name != "nonuniqueness_sec5":
        raise ConfigError("demo-nonuniqueness needs scenario nonuniqueness_sec5")
    sc = cfg.scenario_config()
    report = scenarios.run_nonuniqueness_demo(sc, cfg.stepper_params())
    out.residuals["constraint_residuals"] = report["constraint_residuals"]
    _absorb(out, report)
    if cfg.emit.plotdata:
        rows = []
        for r, n in enumerate(sc.resolutions):
            d = report["distinctness"][r]
            rows.extend((n, a, b, d[a][b]) for a in range(len(d)) for b in range(a))
        write_csv(out_dir / "distinctness.csv", ["resolution", "choice_a", "choice_b", "gap"], rows)


def cmd_demo_uniqueness(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    if cfg.problem is not None or cfg.scenario.name != "separable_uniqueness":
        raise ConfigError("demo-uniqueness needs scenario separable_uniqueness")
    sc = cfg.scenario_config()
    report = scenarios.run_uniqueness_demo(sc, cfg.stepper_params())
    out.residuals["I_gap"] = [r["I_gap"] for r in report["rows"]]
    _absorb(out, report)
    write_csv(out_dir / "uniqueness.csv", ["resolution", "gap", "residual"],
              [(r["resolution"], r["I_gap"], r["constraint_residual"]) for r in report["rows"]])


def cmd_demo_rd_limit(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    if cfg.problem is not None:
        problem = inline_problem(cfg.problem)
    else:
        problem = build_problem(cfg, cfg.rd_resolution)
    if not problem.assumptions_waived:
        a1 = reactions.validate_assumptions(problem.reaction, problem.grid)["A1"]
        if not a1.passed:
            raise ConfigError("demo-rd-limit needs a reaction satisfying A1")
    report = compare_limits(problem, cfg.rd_epsilons, cfg.stepper_params(), fp_tol=cfg.fp_tol,
                            hj_epsilons=cfg.epsilons)
    rows = report["rows"]
    gaps = [r["gap"] for r in rows]
    out.check("gap_nonincreasing", all(b <= a for a, b in zip(gaps, gaps[1:])), gaps[-1], gaps[0])
    h = problem.grid.h
    for r in rows:
        bound = 70 * r["epsilon"] + 10 * h
        out.check(f"sup_u_rd_eps_{r['epsilon']:g}", r["sup_u_rd"] <= bound, r["sup_u_rd"], bound)
        out.check(f"clip_mass_eps_{r['epsilon']:g}", r["max_clip_fraction"] <= 1e-8, r["max_clip_fraction"], 1e-8)
    out.residuals["hj_constraint_residual"] = report["hj_constraint_residual"]
    out.extra.update(report)
    write_csv(out_dir / "gaps.csv", ["epsilon", "gap", "residual"],
              [(r["epsilon"], r["gap"], r["sup_u_rd"]) for r in rows])


def cmd_validate(cfg: RunConfig, out_dir: Path, out: Outcome) -> None:
    problem = build_problem(cfg)
    h = problem.hamiltonian
    for c in hamiltonians.validate_H1(h, h.lipschitz_radius).checks:
        out.invariants.append(c)
    out.residuals["gradient_cap"] = gradient_cap(problem)
    rep = reactions.validate_assumptions(problem.reaction, problem.grid)
    for c in rep.checks:
        if c.name == "A1" and problem.assumptions_waived:
            c = Check(c.name, True, c.measured, c.bound, "waived")
        out.invariants.append(c)
    out.residuals.update(rep.values)


HANDLERS = {
    "solve-given-i": cmd_solve_given_i,
    "solve-relaxed": cmd_solve_relaxed,
    "solve-cascade": cmd_solve_cascade,
    "solve-direct": cmd_solve_direct,
    "demo-nonuniqueness": cmd_demo_nonuniqueness,
    "demo-uniqueness": cmd_demo_uniqueness,
    "demo-rd-limit": cmd_demo_rd_limit,
    "validate": cmd_validate,
}


def _write_report(out_dir: Path, report: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=False) + "\n")


def run(cfg: RunConfig, output_dir: str | Path | None = None) -> int:
    out_dir = Path(output_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Outcome()
    start = time.perf_counter()
    code, reason = EXIT_OK, "success"
    try:
        HANDLERS[cfg.command](cfg, out_dir, out)
        if not all(c.passed for c in out.invariants):
            failed = [c.name for c in out.invariants if not c.passed]
            code, reason = EXIT_INVARIANT, "invariant failure: " + ", ".join(failed)
    except SolverAbort as exc:
        code, reason = EXIT_ABORT, f"solver abort: {exc}"
    except ConfigError as exc:
        code, reason = EXIT_CONFIG, f"config error: {exc}"
    report = {
        "command": cfg.command,
        "scenario": cfg.scenario.name if cfg.scenario is not None else "inline",
        "params": cfg.model_dump(mode="json", exclude={"output_dir"}),
        "invariants": [c.to_dict() for c in out.invariants],
        "residuals": out.residuals,
        "timings": {"total_seconds": time.perf_counter() - start},
        "exit_reason": reason,
        "exit_code": code,
    }
    report.update({k: v for k, v in out.extra.items() if k not in report})
    _write_report(out_dir, report)
    return code


def _config_error_report(path: str, output_dir: str | None, message: str) -> None:
    target = output_dir
    if target is None:
        try:
            target = json.loads(Path(path).read_text()).get("output_dir")
        except (OSError, ValueError, AttributeError):
            target = None
    if target is None:
        return
    _write_report(Path(target), {"command": None, "exit_reason": f"config error: {message}",
                                 "exit_code": EXIT_CONFIG, "invariants": []})


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="constrained-hj", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="path to the JSON run configuration")
    parser.add_argument("--output-dir", default=None, help="override output_dir from the config")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _config_error_report(args.config, args.output_dir, str(exc))
        return EXIT_CONFIG
    code = run(cfg, args.output_dir)
    if code != EXIT_OK:
        report = json.loads((Path(args.output_dir or cfg.output_dir) / "report.json").read_text())
        print(report["exit_reason"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
