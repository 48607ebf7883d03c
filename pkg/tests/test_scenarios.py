import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constrained_hj import reactions as rx
from constrained_hj.core import TimeSeries, sup_value
from constrained_hj.scenarios import (
    ScenarioConfig, build_nonuniqueness_problem, build_separable_uniqueness_problem, continuity_residuals,
    default_multiplier_choices, envelope_v, envelope_w, matching_point_v, matching_point_w, run_nonuniqueness_demo,
    run_uniqueness_demo, u0_nonuniqueness,
)

t_adm = st.floats(0.0, 0.05)
c_adm = st.floats(0.01, 4.0)


def test_u0_nonuniqueness_values():
    assert u0_nonuniqueness(0.0) == -0.75
    assert u0_nonuniqueness(1.0) == -0.25
    assert u0_nonuniqueness(np.nextafter(1.0, 0.0)) == pytest.approx(-0.25, abs=1e-12)
    assert u0_nonuniqueness(2.0) == 0.0 and u0_nonuniqueness(-3.5) == 0.0
    p = build_nonuniqueness_problem()
    assert sup_value(p.u0) == 0.0
    assert p.assumptions_waived and p.grid.lower == (-4.0,)


def test_separable_problem_assumptions():
    p = build_separable_uniqueness_problem(512)
    rep = rx.validate_assumptions(p.reaction, p.grid)
    assert rep["A1"].passed
    assert rep["A2"].measured == pytest.approx(0.0, abs=1e-15)
    assert rep["A3"].measured == pytest.approx(np.exp(-36.0), rel=1e-9)
    assert rep.passed


def test_envelope_examples():
    assert matching_point_v(0.0, 1.0) == 1.0
    assert matching_point_w(0.0, 1.0) == pytest.approx(2 - np.sqrt(3), abs=1e-15)
    assert envelope_v(3.0, 0.02, 1.0) == 0.0
    assert envelope_w(0.0, 0.01, 1.0) == pytest.approx(-0.76, abs=1e-15)
    x = np.linspace(-4, 4, 4001)
    v0 = envelope_v(x, 0.0, 1.0)
    u0 = u0_nonuniqueness(x)
    assert np.all(v0 >= u0)
    np.testing.assert_array_equal(v0[np.abs(x) >= 1], u0[np.abs(x) >= 1])


def test_envelope_rejects():
    with pytest.raises(ValueError):
        envelope_v(0.0, 0.25, 1.0)
    with pytest.raises(ValueError):
        envelope_w(0.0, 0.25, 1.0)
    with pytest.raises(ValueError):
        envelope_v(0.0, 0.01, 0.0)


def test_envelope_w_below_u0_fails_on_the_parabola():
    # the lower barrier at t = 0 sits above u0 on (2 - sqrt 3, 1): e.g. x = 1/2
    assert envelope_w(0.5, 0.0, 1.0) > u0_nonuniqueness(0.5)


@given(t_adm, c_adm)
def test_envelope_continuity(t, c):
    rv, rw = continuity_residuals(t, c)
    assert rv <= 1e-12 and rw <= 1e-12
    for env, m in ((envelope_v, matching_point_v(t, c)), (envelope_w, matching_point_w(t, c))):
        left = env(np.nextafter(m, 0.0), t, c)
        right = env(m, t, c)
        assert abs(left - right) <= 1e-12


@given(t_adm, c_adm)
def test_envelope_sup_zero(t, c):
    x = np.linspace(-4, 4, 801)
    assert np.max(envelope_v(x, t, c)) == 0.0
    assert np.max(envelope_w(x, t, c)) == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(horizon=0.2)
    bad = TimeSeries(np.array([0.0, 0.05]), np.array([-0.5, -0.5]))
    with pytest.raises(ValueError, match="inadmissible"):
        ScenarioConfig(multiplier_choices=[bad] * 3, c=1.0)
    cfg = ScenarioConfig()
    assert cfg.resolutions == (256, 512, 1024) and cfg.horizon == 0.05 and cfg.c == 1.0
    with pytest.raises(ValueError):
        ScenarioConfig(name="other")


def test_default_choices():
    a, b, c = default_multiplier_choices(0.05)
    assert a(0.05) == 0.0 and b(0.05) == 0.025 and c(0.05) == 0.25
    a, b, c = default_multiplier_choices(0.1)
    assert c(0.1) == 0.5


def test_demo_rejects_too_few_choices():
    cfg = ScenarioConfig(multiplier_choices=default_multiplier_choices(0.05)[:2], resolutions=(64,))
    with pytest.raises(ValueError, match="three"):
        run_nonuniqueness_demo(cfg)


def test_nonuniqueness_demo_small():
    rep = run_nonuniqueness_demo(ScenarioConfig(resolutions=(64, 128)))
    d = np.array(rep["distinctness"])
    assert d.shape == (2, 3, 3)
    # the reaction gap integrates to at most 2.5 t^2 at x = 0; transport only narrows it
    assert 0.5 * 2.5 * 0.05**2 <= d[-1, 0, 2] <= 2.5 * 0.05**2 * (1 + 1e-9)
    assert {c["name"] for c in rep["invariants"]} >= {"lipschitz_bound", "distinct_0_2_persists"}
    assert all(s["upper_margin"] > -1 for s in rep["sandwich"])


def test_uniqueness_demo_small():
    cfg = ScenarioConfig(name="separable_uniqueness", resolutions=(256,), epsilons=(0.2, 0.1), horizon=0.2)
    rep = run_uniqueness_demo(cfg)
    row = rep["rows"][0]
    assert row["direct_residual"] <= 1e-9
    assert row["I_direct_range"][1] <= 1.0 + 1e-3 + 5 / 64
    assert row["I_cascade_min_increment"] >= -1e-7
    assert row["slack"] >= 0.0
