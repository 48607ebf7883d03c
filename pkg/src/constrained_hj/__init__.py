"""Numerical solvers for Hamilton-Jacobi equations with a sup-constraint.

The unknown pair is ``(u, I)`` with ``u_t = H(Du) + R(x, I(t))`` and
``sup_x u(., t) = 0``; ``I`` acts as a scalar Lagrange multiplier.
"""

from .core import (
    ConfigError,
    Grid,
    GridFunction,
    Problem,
    SolverAbort,
    TimeSeries,
    Trajectory,
    interp,
    lipschitz_estimate,
    make_grid,
    sup_value,
)

__all__ = [
    "ConfigError",
    "Grid",
    "GridFunction",
    "Problem",
    "SolverAbort",
    "TimeSeries",
    "Trajectory",
    "interp",
    "lipschitz_estimate",
    "make_grid",
    "sup_value",
]

__version__ = "0.1.0"
