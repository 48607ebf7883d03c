import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from constrained_hj import reactions as rx
from constrained_hj.core import GridFunction, make_grid
from constrained_hj.rd_limit import (
    RDState, consumption, default_kernel, hopf_cole, initial_state, laplacian, max_stable_dt, rd_step, total_mass,
)
from constrained_hj.scenarios import build_separable_uniqueness_problem


def _state(grid, n, eps=0.1):
    return RDState(grid, GridFunction(grid, n), eps, default_kernel(grid))


@pytest.fixture
def grid():
    return make_grid(1, -6, 6, 256)


def test_kernel(grid):
    k = default_kernel(grid)
    assert np.all(k.values >= 0)
    assert k.values[0] == 0 and k.values[-1] == 0
    assert consumption(_state(grid, np.ones(grid.shape))) == pytest.approx(1.0, abs=1e-12)
    assert consumption(_state(grid, np.zeros(grid.shape))) == 0.0


def test_state_validation(grid):
    with pytest.raises(ValueError):
        _state(grid, -np.ones(grid.shape))
    with pytest.raises(ValueError):
        RDState(grid, GridFunction(grid, np.ones(grid.shape)), 0.1, GridFunction(grid, np.ones(grid.shape)))


def test_consumption_fine_quadrature():
    p = build_separable_uniqueness_problem(256)
    eps = 0.1
    s = initial_state(p.u0, eps)
    fine = make_grid(1, -6, 6, 2560)
    psi = np.maximum(0.0, 1.0 - fine.axis(0) ** 2 / 4) ** 2
    psi /= np.trapezoid(psi, fine.axis(0))
    ref = np.trapezoid(psi * np.exp(-np.minimum(fine.axis(0) ** 2, 1.0) / eps), fine.axis(0))
    assert consumption(s) == pytest.approx(ref, rel=1e-3)


def test_extinction_invariant(grid):
    s = _state(grid, np.zeros(grid.shape))
    out = rd_step(s, build_separable_uniqueness_problem(256).reaction, 1e-4)
    assert np.all(out.density.values == 0.0)


def test_pure_diffusion_mass(grid):
    n = np.exp(-grid.axis(0) ** 2)
    s = _state(grid, n, eps=0.2)
    dt = 0.9 * max_stable_dt(grid, 0.2, 0.0)
    m0 = total_mass(s)
    for _ in range(50):
        s = rd_step(s, rx.zero_reaction(), dt)
    # copy-out ghosts make the node sum exactly conserved; the trapezoid weights differ only at the ends
    assert np.sum(s.density.values) == pytest.approx(np.sum(n), rel=1e-12)
    edge = 0.5 * grid.h * (s.density.values[0] + s.density.values[-1] + n[0] + n[-1])
    assert abs(total_mass(s) - m0) <= edge + 1e-12


def test_ode_reduction(grid):
    # constant density, R = -I: dn/dt = -(n / eps) * n * int(psi) = -n^2 / eps
    eps, n0 = 0.2, 0.5
    s = _state(grid, np.full(grid.shape, n0), eps)
    r = rx.linear_decay_reaction(1.0)
    dt = 1e-4
    for _ in range(200):
        s = rd_step(s, r, dt)
    ref = solve_ivp(lambda t, y: -y * y / eps, (0, 200 * dt), [n0], rtol=1e-12, atol=1e-14).y[0, -1]
    assert s.density.values[100] == pytest.approx(ref, rel=1e-3)
    assert consumption(s) == pytest.approx(ref, rel=1e-3)


def test_dt_precondition(grid):
    s = _state(grid, np.ones(grid.shape), 0.1)
    with pytest.raises(ValueError, match="stability"):
        rd_step(s, rx.zero_reaction(), 1.0)


def test_hopf_cole(grid):
    eps = 0.1
    s = _state(grid, np.ones(grid.shape), eps)
    assert np.all(hopf_cole(s).values == 0.0)
    n = np.ones(grid.shape)
    n[3] = 0.0
    assert hopf_cole(_state(grid, n, eps)).values[3] == pytest.approx(eps * np.log(1e-30))
    with pytest.raises(ValueError):
        hopf_cole(s, 0.0)


@given(st.floats(0.05, 0.5))
def test_hopf_cole_round_trip(eps):
    p = build_separable_uniqueness_problem(64)
    s = initial_state(p.u0, eps)
    np.testing.assert_allclose(hopf_cole(s).values, p.u0.values, atol=1e-14)


def test_nonnegative_and_clip(grid):
    p = build_separable_uniqueness_problem(256)
    s = initial_state(p.u0, 0.1)
    sup_R = 2.0
    dt = 0.9 * max_stable_dt(grid, 0.1, sup_R)
    for _ in range(20):
        m = total_mass(s)
        s = rd_step(s, p.reaction, dt)
        assert np.all(s.density.values >= 0)
        assert s.clip_mass <= 1e-8 * m


def test_laplacian_quadratic():
    g = make_grid(2, -1, 1, 16)
    P = g.points()
    f = np.sum(P**2, axis=-1)
    lap = laplacian(f, g)
    np.testing.assert_allclose(lap[1:-1, 1:-1], 4.0, atol=1e-10)
