"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES  # noqa: E402

from constrained_hj.constraint import (  # noqa: E402
    contraction_window, sigma_map, solve_direct, solve_relaxed, stability_gap,
)
from constrained_hj.core import TimeSeries, sup_norm_gap  # noqa: E402
from constrained_hj.hj_solver import Stepper, StepperParams, lipschitz_monitor, path_L, solve_given_I  # noqa: E402
from constrained_hj.rd_limit import compare_limits  # noqa: E402
from constrained_hj.scenarios import (  # noqa: E402
    build_nonuniqueness_problem, build_separable_uniqueness_problem, continuity_residuals,
    default_multiplier_choices, envelope_v, envelope_w, matching_point_v, matching_point_w, transformed_gaps,
    u0_nonuniqueness,
)

LADDER = (256, 512, 1024)
EPSILONS = (0.2, 0.1, 0.05, 0.025)
FP_TOL = 1e-8
LF = StepperParams()


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def separable_runs():
    """Relaxed stages, cascade limit and direct solution on the ladder, with per-stage timings."""
    out = {}
    for n in LADDER:
        p = build_separable_uniqueness_problem(n)
        st = Stepper(p, LF)
        stages, timings = [], []
        for eps in EPSILONS:
            t0 = time.perf_counter()
            stages.append(solve_relaxed(p, eps, LF, FP_TOL, stepper=st))
            timings.append(time.perf_counter() - t0)
        d_traj, d_I = solve_direct(p, LF, 1e-10, stepper=st)
        out[n] = {"problem": p, "stages": stages, "timings": timings, "direct": (d_traj, d_I)}
    return out


@pytest.fixture(scope="module")
def nonuniqueness_runs():
    t0 = time.perf_counter()
    out = {}
    choices = default_multiplier_choices(0.05)
    for n in LADDER:
        p = build_nonuniqueness_problem(n, 0.05)
        st = Stepper(p, LF)
        out[n] = {"problem": p, "trajs": [solve_given_I(p, I, LF, stepper=st) for I in choices]}
    return out, choices, time.perf_counter() - t0


def test_criterion_1_contraction():
    t0 = time.perf_counter()
    p = build_separable_uniqueness_problem(1024)
    st = Stepper(p, LF)
    rng = np.random.default_rng(0)
    worst = {}
    ok = True
    for eps in (0.2, 0.1, 0.05):
        T = contraction_window(p, eps)
        knots = np.linspace(0.0, T, 9)
        ratios = []
        for _ in range(10):
            a = TimeSeries(knots, np.r_[0.0, rng.uniform(0, 1, 8)])
            b = TimeSeries(knots, np.r_[0.0, rng.uniform(0, 1, 8)])
            sa = sigma_map(a, p, eps, LF, (0.0, T), stepper=st)
            sb = sigma_map(b, p, eps, LF, (0.0, T), stepper=st)
            ratios.append(np.max(np.abs(sa.values - sb.values)) / np.max(np.abs(a(sa.times) - b(sa.times))))
        worst[eps] = max(ratios)
        ok &= worst[eps] <= 1 - eps / 2 + 0.02
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    detail = ", ".join(f"eps={e}: max ratio {r:.4f} <= {1 - e / 2 + 0.02:.3f}" for e, r in worst.items())
    report(1, ok, f"{detail}; {elapsed:.1f}s < 60s")


def test_criterion_2_fixed_point(separable_runs):
    worst_res, worst_t = 0.0, 0.0
    for run in separable_runs.values():
        for sol, dt in zip(run["stages"], run["timings"]):
            worst_res = max(worst_res, sol.fixed_point_residual)
            worst_t = max(worst_t, dt)
    ok = worst_res <= 1e-6 and worst_t < 30
    report(2, ok, f"max |eps I - sup u| = {worst_res:.3g} <= 1e-6; slowest solve {worst_t:.1f}s < 30s")


def test_criterion_3_multiplier_laws(separable_runs):
    ok = True
    worst_dec, worst_out = 0.0, 0.0
    for n, run in separable_runs.items():
        # the last stage is the cascade output
        paths = [s.I_path for s in run["stages"]] + [run["direct"][1]]
        hi = 1 + 1e-3 + 5 / n
        for I in paths:
            dec = float(max(0.0, -np.min(np.diff(I.values))))
            out = float(max(0.0, -1e-7 - I.values.min(), I.values.max() - hi))
            worst_dec, worst_out = max(worst_dec, dec), max(worst_out, out)
            ok &= dec <= 1e-7 and out == 0.0
    report(3, ok, f"largest decrease {worst_dec:.3g} <= 1e-7; range excess {worst_out:.3g}")


def test_criterion_4_lipschitz(separable_runs, nonuniqueness_runs):
    violations, frames = 0, 0
    for run in separable_runs.values():
        p = run["problem"]
        pairs = [(s.trajectory, s.I_path) for s in run["stages"]] + [run["direct"]]
        for traj, I in pairs:
            mon = lipschitz_monitor(traj, p, path_L(p, I(traj.times)))
            violations += mon.violations
            frames += traj.times.size
    runs, choices, _ = nonuniqueness_runs
    for run in runs.values():
        p = run["problem"]
        for traj, I in zip(run["trajs"], choices):
            violations += lipschitz_monitor(traj, p, path_L(p, I(traj.times))).violations
            frames += traj.times.size
    report(4, violations == 0, f"{violations} violations over {frames} frames")


def test_criterion_5_stability():
    z, o = TimeSeries.constant(0.0), TimeSeries.constant(0.1)
    C, rows, ok = None, [], True
    for n in LADDER:
        p = build_separable_uniqueness_problem(n, horizon=0.2)
        st = Stepper(p, LF)
        u1, u2 = solve_given_I(p, z, LF, stepper=st), solve_given_I(p, o, LF, stepper=st)
        r = stability_gap(u1, u2, z, o, 1.0)
        h = p.grid.h
        # rounding accumulated over the run; the exact discrete gap here is 0.1 T
        fp = u1.times.size * np.finfo(float).eps * max(np.max(np.abs(u1.frames)), np.max(np.abs(u2.frames)))
        if C is None:
            # calibrate against the fixed constant 0.02 = K1 * T * |I2 - I1|
            C = max(0.0, (r.f[-1] - 0.02) / h)
        bound = 0.02 + C * h
        ok &= r.f[-1] <= bound + fp
        rows.append(f"{n}: {r.f[-1]:.15g} <= {bound:.15g} (+ rounding {fp:.2g})")
    report(5, ok, f"C = {C:.3g}; " + ", ".join(rows))


def test_criterion_6_uniqueness(separable_runs):
    gaps, slacks = [], []
    for n in LADDER:
        run = separable_runs[n]
        p, d_traj, d_I = run["problem"], *run["direct"]
        last = run["stages"][-1]
        gaps.append(sup_norm_gap(last.I_path, d_I, p.horizon))
        tg = transformed_gaps(p, last.trajectory, last.I_path, d_traj, d_I, np.linspace(0, p.horizon, 21))
        slacks.append(tg["slack"])
    fine = separable_runs[1024]
    stage = [sup_norm_gap(s.I_path, fine["direct"][1], fine["problem"].horizon) for s in fine["stages"]]
    res_ok = all(b < a for a, b in zip(gaps, gaps[1:]))
    eps_ok = all(b < a for a, b in zip(stage, stage[1:]))
    slack_ok = all(s <= 2 * slacks[0] for s in slacks)
    report(6, res_ok and eps_ok and slack_ok,
           f"I gap by resolution {np.round(gaps, 5).tolist()} (decreasing: {res_ok}); "
           f"by eps at 1024 {np.round(stage, 5).tolist()} (decreasing: {eps_ok}); "
           f"slack {np.round(slacks, 5).tolist()} within 2x: {slack_ok}")


def test_criterion_7_nonuniqueness(nonuniqueness_runs):
    runs, _, elapsed = nonuniqueness_runs
    res = {n: [float(np.max(np.abs(t.sup_path()))) for t in run["trajs"]] for n, run in runs.items()}
    shrink = all(r1 <= r0 / 1.5 and r1 < r0 for r0, r1 in zip(res[256], res[1024]))
    dist = {n: float(np.max(np.abs(run["trajs"][0].frames - run["trajs"][2].frames))) for n, run in runs.items()}
    persists = all(d >= 0.5 * dist[256] for d in dist.values())
    ok = shrink and persists and elapsed < 60
    report(7, ok, f"residuals 256 {res[256]} -> 1024 {res[1024]} (factor 1.5: {shrink}); "
                  f"distinctness {[round(d, 6) for d in dist.values()]} (persists: {persists}); {elapsed:.1f}s")


def test_criterion_8_envelopes():
    rng = np.random.default_rng(8)
    ts, cs = rng.uniform(0.0, 0.05, 1000), rng.uniform(0.05, 4.0, 1000)
    worst_cont, sup_ok = 0.0, True
    x = build_nonuniqueness_problem(1024).grid.axis(0)
    for t, c in zip(ts, cs):
        worst_cont = max(worst_cont, *continuity_residuals(t, c))
        sup_ok &= np.max(envelope_v(x, t, c)) == 0.0 and np.max(envelope_w(x, t, c)) == 0.0
    u0 = u0_nonuniqueness(x)
    above = float(np.max(envelope_w(x, 0.0, 1.0) - u0))
    below = float(np.max(u0 - envelope_v(x, 0.0, 1.0)))
    order_ok = above <= 0.0 and below <= 0.0
    ok = worst_cont <= 1e-12 and sup_ok and order_ok
    report(8, ok, f"continuity {worst_cont:.3g} <= 1e-12; sups zero: {sup_ok}; "
                  f"max(w0 - u0) = {above:.3g}, max(u0 - v0) = {below:.3g} "
                  f"(m_w(0) = {matching_point_w(0.0, 1.0):.4f}, m_v(0) = {matching_point_v(0.0, 1.0):.4f})")


def test_criterion_9_scheme_cross_oracle():
    rows, ok = [], True
    zero = TimeSeries.constant(0.0)
    for n in LADDER:
        p = build_nonuniqueness_problem(n, 0.05)
        a = solve_given_I(p, zero, StepperParams(scheme="lax_friedrichs"))
        b = solve_given_I(p, zero, StepperParams(scheme="godunov_quadratic"))
        gap = float(np.max(np.abs(a.final.values - b.final.values)))
        ok &= gap <= 10 * p.grid.h
        rows.append(f"{n}: {gap:.4g} <= {10 * p.grid.h:.4g}")
    report(9, ok, ", ".join(rows))


def test_criterion_10_rd_comparator():
    t0 = time.perf_counter()
    p = build_separable_uniqueness_problem(512)
    out = compare_limits(p, (0.4, 0.2, 0.1, 0.05), LF)
    elapsed = time.perf_counter() - t0
    gaps = [r["gap"] for r in out["rows"]]
    mono = all(b <= a for a, b in zip(gaps, gaps[1:]))
    sup_ok = all(r["sup_u_rd"] <= 70 * r["epsilon"] + 10 * p.grid.h for r in out["rows"])
    ok = mono and sup_ok and elapsed < 120
    report(10, ok, f"gaps {np.round(gaps, 4).tolist()} nonincreasing: {mono}; "
                   f"sup|u_RD| {[round(r['sup_u_rd'], 4) for r in out['rows']]} within 70 eps + 10h: {sup_ok}; "
                   f"{elapsed:.1f}s < 120s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
