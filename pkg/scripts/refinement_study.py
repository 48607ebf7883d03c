"""Refinement tables for both canonical problems.

Prints the LF/Godunov gap and the constraint residual for the nonuniqueness
example with I = 0, then the cascade-vs-direct multiplier gap for the
separable problem, both over all of [0, T] and away from the initial layer.
"""

import argparse

import numpy as np

from constrained_hj.constraint import solve_direct, solve_relaxed
from constrained_hj.core import TimeSeries
from constrained_hj.hj_solver import Stepper, StepperParams, solve_given_I
from constrained_hj.scenarios import build_nonuniqueness_problem, build_separable_uniqueness_problem


def scheme_table(resolutions):
    print("nonuniqueness example, I = 0, T = 0.05")
    print(f"{'n':>6} {'h':>10} {'|LF - God|':>12} {'max|sup u|':>12}")
    zero = TimeSeries.constant(0.0)
    for n in resolutions:
        p = build_nonuniqueness_problem(n, 0.05)
        lf = solve_given_I(p, zero, StepperParams())
        god = solve_given_I(p, zero, StepperParams(scheme="godunov_quadratic"))
        gap = np.max(np.abs(lf.final.values - god.final.values))
        print(f"{n:>6} {p.grid.h:>10.5f} {gap:>12.4e} {np.max(np.abs(lf.sup_path())):>12.3e}")


def multiplier_table(resolutions, epsilons, t_min):
    print(f"\nseparable problem, T = 0.5: sup |I_eps - I_direct| on [0, T] and on [{t_min}, T]")
    params = StepperParams()
    for n in resolutions:
        p = build_separable_uniqueness_problem(n)
        st = Stepper(p, params)
        _, d_I = solve_direct(p, params, stepper=st)
        cells = []
        for eps in epsilons:
            s = solve_relaxed(p, eps, params, 1e-8, stepper=st)
            t = s.I_path.times
            d = np.abs(s.I_path.values - d_I(t))
            cells.append(f"eps={eps}: {d.max():.4f} / {d[t >= t_min].max():.4f}")
        print(f"{n:>6}  I_direct(0) = {d_I.values[0]:.4f}  " + "  ".join(cells))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[256, 512, 1024, 2048])
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    ap.add_argument("--t-min", type=float, default=0.25)
    args = ap.parse_args()
    scheme_table(args.resolutions)
    multiplier_table(args.resolutions[:3], args.epsilons, args.t_min)


if __name__ == "__main__":
    main()
