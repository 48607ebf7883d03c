import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constrained_hj import hamiltonians as hm

p_val = st.floats(-5, 5, allow_nan=False)


def test_eval_quadratic_examples():
    q1, q2 = hm.quadratic(1), hm.quadratic(2)
    assert hm.eval_H(q1, [0.0]) == 0.0
    assert hm.eval_H(q2, [1.0, 1.0]) == 2.0
    assert hm.eval_H(q1, [-3.0]) == 9.0
    assert hm.eval_H(q1, -3.0) == 9.0
    with pytest.raises(ValueError):
        hm.eval_H(q1, [np.inf])


def test_validate_H1_quadratic():
    rep = hm.validate_H1(hm.quadratic(1, lipschitz_radius=2.0), 2.0)
    assert rep.passed
    assert rep.values["empirical_lipschitz"] == pytest.approx(4.0, rel=1e-2)


def test_validate_H1_abs_and_signed():
    rep = hm.validate_H1(hm.from_form("abs"), 1.0)
    assert rep.passed
    assert rep.values["empirical_lipschitz"] == pytest.approx(1.0, rel=1e-6)
    signed = hm.custom(lambda p: p[..., 0], lipschitz_constant=1.0)
    rep = hm.validate_H1(signed, 1.0)
    assert not rep["H_nonnegative"].passed


def test_validate_H1_2d_lattice():
    rep = hm.validate_H1(hm.quadratic(2, lipschitz_radius=1.0), 1.0, samples=2000)
    assert rep.passed


def test_validate_H1_requires_samples():
    with pytest.raises(ValueError):
        hm.validate_H1(hm.quadratic(1), 1.0, samples=10)


def test_lax_friedrichs_examples():
    q = hm.quadratic(1)
    assert hm.lax_friedrichs(q, [1.0], [1.0], [2.0]) == 1.0
    assert hm.lax_friedrichs(hm.from_form("abs"), [0.0], [0.0], [1.0]) == 0.0
    assert hm.lax_friedrichs(q, [0.0], [2.0], [4.0]) == 5.0
    with pytest.raises(ValueError):
        hm.lax_friedrichs(q, [0.0], [0.0], [0.0])


def test_godunov_examples():
    # u_t = |u_x|^2 from u0 = |x| gives u(0, t) = t (Hopf-Lax max formula), so the
    # corner at a minimum moves with speed 1; at a maximum the value spreads with speed 0
    assert hm.godunov_quadratic_1d(-1.0, 1.0) == 1.0
    assert hm.godunov_quadratic_1d(1.0, -1.0) == 0.0
    for p in (-2.0, 0.5, 3.0):
        assert hm.godunov_quadratic_1d(p, p) == p * p


@given(p_val, p_val)
def test_godunov_range(pm, pp):
    v = hm.godunov_quadratic_1d(pm, pp)
    assert 0.0 <= v <= max(pm * pm, pp * pp) * (1 + 4e-16)


@given(p_val, p_val, p_val)
def test_godunov_monotone(pm, pp, bump):
    # nondecreasing in p+, nonincreasing in p-
    d = abs(bump)
    assert hm.godunov_quadratic_1d(pm, pp + d) >= hm.godunov_quadratic_1d(pm, pp)
    assert hm.godunov_quadratic_1d(pm + d, pp) <= hm.godunov_quadratic_1d(pm, pp)


@given(st.lists(p_val, min_size=2, max_size=2))
def test_lf_consistency(p):
    for h in (hm.quadratic(2), hm.from_form("abs", dim=2), hm.from_form("power", dim=2, exponent=3.0)):
        assert hm.lax_friedrichs(h, p, p, [1.0, 1.0]) == pytest.approx(hm.eval_H(h, p), abs=1e-12)


@given(p_val, p_val, st.floats(0, 1))
def test_lf_monotone(pm, pp, d):
    q = hm.quadratic(1)
    alpha = [2.0 * 6.0 * hm.ALPHA_INFLATION]
    base = hm.lax_friedrichs(q, [pm], [pp], alpha)
    assert hm.lax_friedrichs(q, [pm], [pp + d], alpha) >= base - 1e-12
    assert hm.lax_friedrichs(q, [pm + d], [pp], alpha) <= base + 1e-12


def test_numerical_hamiltonian_vectorised():
    q = hm.quadratic(2)
    pm = np.array([[[-1.0, 0.5]]])
    pp = np.array([[[1.0, 0.5]]])
    god = hm.numerical_hamiltonian("godunov_quadratic", q)
    assert god(pm, pp)[0, 0] == pytest.approx(1.0 + 0.25)
    lf = hm.numerical_hamiltonian("lax_friedrichs", q, np.array([2.0, 2.0]))
    assert lf(pm, pp)[0, 0] == pytest.approx(0.25 + 2.0)
    with pytest.raises(ValueError):
        hm.numerical_hamiltonian("godunov_quadratic", hm.from_form("abs"))


def test_gradient_bound_kink():
    b = hm.from_form("abs").axis_gradient_bound(2.0)
    assert b[0] == pytest.approx(1.0, rel=1e-6)
    assert hm.quadratic(2).axis_gradient_bound(3.0).tolist() == [6.0, 6.0]
