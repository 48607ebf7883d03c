"""Measured Lipschitz ratios of the Sigma map against 1 - eps/2, for random seed pairs."""

import argparse

import numpy as np

from constrained_hj.constraint import contraction_window, sigma_map
from constrained_hj.core import TimeSeries
from constrained_hj.hj_solver import Stepper, StepperParams
from constrained_hj.scenarios import build_separable_uniqueness_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=1024)
    ap.add_argument("--pairs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    p = build_separable_uniqueness_problem(args.resolution)
    params = StepperParams()
    st = Stepper(p, params)
    rng = np.random.default_rng(args.seed)
    for eps in (0.2, 0.1, 0.05):
        T = contraction_window(p, eps)
        knots = np.linspace(0.0, T, 9)
        ratios = []
        for _ in range(args.pairs):
            a = TimeSeries(knots, np.r_[0.0, rng.uniform(0, 1, 8)])
            b = TimeSeries(knots, np.r_[0.0, rng.uniform(0, 1, 8)])
            sa = sigma_map(a, p, eps, params, (0.0, T), stepper=st)
            sb = sigma_map(b, p, eps, params, (0.0, T), stepper=st)
            ratios.append(np.max(np.abs(sa.values - sb.values)) / np.max(np.abs(a(sa.times) - b(sa.times))))
        print(f"eps={eps:<5} window={T:.3f}  ratio max {max(ratios):.4f} mean {np.mean(ratios):.4f}  "
              f"bound {1 - eps / 2:.3f}")


if __name__ == "__main__":
    main()
