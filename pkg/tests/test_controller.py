import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_lipm import ControllerConfig, control, dz, sat
from hybrid_lipm.controller import control_components


def test_sat_and_deadzone_examples():
    assert sat(0.05, 0.075) == 0.05
    assert sat(0.2, 0.075) == 0.075
    assert sat(-0.2, 0.075) == -0.075
    assert dz(0.05, 0.075) == 0.0
    assert dz(0.2, 0.075) == pytest.approx(0.125)
    assert dz(-0.2, 0.075) == pytest.approx(-0.125)


def test_zero_error_gives_zero_command():
    cfg = ControllerConfig(K=[34.5, 4.07], L=0.98, u_bar=0.075)
    assert control(cfg, [0.0, 0.0]) == 0.0


def test_unsaturated_region_is_linear():
    cfg = ControllerConfig(K=[2.0, 0.5], L=0.5, u_bar=0.075)
    assert control(cfg, [0.01, 0.02]) == pytest.approx(0.03, rel=1e-14)


def test_windup_pushes_into_saturation():
    cfg = ControllerConfig(K=[1.0, 0.0], L=0.5, u_bar=0.075)
    assert control(cfg, [0.1, 0.0]) == 0.075
    assert cfg.windup_gain == pytest.approx(1.0)


def test_rejects_bad_config():
    with pytest.raises(ValueError):
        ControllerConfig(K=[1.0, 1.0], L=1.0, u_bar=0.075)
    with pytest.raises(ValueError):
        ControllerConfig(K=[1.0, 1.0], L=0.0, u_bar=0.0)


def test_vectorized_matches_scalar(ctl):
    rng = np.random.default_rng(0)
    eps = rng.normal(scale=0.05, size=(500, 2))
    vec = control(ctl, eps)
    for row, u in zip(eps, vec):
        assert control_components(ctl, row[0], row[1]) == u


def test_bounded_on_a_million_states(ctl):
    rng = np.random.default_rng(6)
    eps = rng.normal(scale=[0.1, 1.0], size=(1_000_000, 2))
    u = control(ctl, eps)
    assert np.max(np.abs(u)) <= ctl.u_bar
    assert np.array_equal(control(ctl, -eps), -u)


finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite, finite, st.floats(-50, 50), st.floats(-50, 50), st.floats(-5, 0.99),
       st.floats(1e-3, 1.0))
def test_bounded_and_odd(ep, ev, k1, k2, L, u_bar):
    cfg = ControllerConfig(K=[k1, k2], L=L, u_bar=u_bar)
    u = control(cfg, [ep, ev])
    assert abs(u) <= u_bar
    assert control(cfg, [-ep, -ev]) == -u


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_continuous(ep, ev):
    cfg = ControllerConfig(K=[34.5, 4.07], L=0.9885, u_bar=0.075)
    h = 1e-9
    # Lipschitz with constant |K| / (1 - L) at worst
    bound = (abs(cfg.K[0]) + abs(cfg.K[1])) / (1 - cfg.L) * h * 1.01 + 1e-15
    assert abs(control(cfg, [ep + h, ev]) - control(cfg, [ep, ev])) <= bound
    assert abs(control(cfg, [ep, ev + h]) - control(cfg, [ep, ev])) <= bound
