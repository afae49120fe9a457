import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from hybrid_lipm import (InfeasibleGait, ModelParams, NotInJumpSet, TimerOutOfRange,
                         complete_params, flow_field, flow_matrices, jump_map, reference,
                         transition_matrix)
from hybrid_lipm.model import nominal_speed

from .conftest import OMEGA


def periodic_speed_by_bisection(omega, r_bar, T):
    """v_bar with expm(A T) (-r, v) having position r, solved without the closed form."""
    A = np.array([[0.0, 1.0], [omega**2, 0.0]])
    Phi = expm(A * T)
    return brentq(lambda v: (Phi @ [-r_bar, v])[0] - r_bar, 1e-6, 10.0, xtol=1e-15, rtol=1e-15)


def test_complete_params_matches_bisection(params):
    v = periodic_speed_by_bisection(OMEGA, 0.15, 1.2)
    assert params.v_bar == pytest.approx(v, rel=1e-9)
    assert params.v_bar == pytest.approx(0.6258, abs=1e-4)


def test_periodicity_also_fixes_velocity(params):
    A = np.array([[0.0, 1.0], [OMEGA**2, 0.0]])
    end = expm(A * params.T) @ [-params.r_bar, params.v_bar]
    assert end == pytest.approx([params.r_bar, params.v_bar], abs=1e-10)


def test_complete_params_round_trips(params):
    q = complete_params(OMEGA, r_bar=0.15, v_bar=params.v_bar)
    assert q.T == pytest.approx(1.2, abs=1e-12)
    q = complete_params(OMEGA, v_bar=params.v_bar, T=1.2)
    assert q.r_bar == pytest.approx(0.15, abs=1e-12)


def test_printed_speed_is_not_a_gait():
    # 0.552 m/s with r_bar = 0.15 gives v/omega - r < 0
    with pytest.raises(InfeasibleGait):
        complete_params(OMEGA, r_bar=0.15, v_bar=0.552)
    with pytest.raises(InfeasibleGait):
        ModelParams(z_c=0.58, r_bar=0.15, v_bar=0.552, T=1.2, u_bar=0.075)


def test_inconsistent_triple_rejected(params):
    with pytest.raises(InfeasibleGait):
        ModelParams(z_c=0.58, r_bar=0.15, v_bar=0.7, T=1.2, u_bar=0.075)


@pytest.mark.parametrize("kw", [dict(r_bar=0.15), dict(r_bar=0.15, v_bar=0.6, T=1.2), {}])
def test_complete_params_needs_exactly_two(kw):
    with pytest.raises(ValueError):
        complete_params(OMEGA, **kw)


def test_omega_follows_g_and_height(params):
    assert params.omega == pytest.approx(math.sqrt(params.g / params.z_c), rel=1e-12)
    assert params.speed_margin == pytest.approx(params.v_bar / params.omega - params.r_bar,
                                                rel=1e-9)


def test_config_round_trip(params):
    q = ModelParams.from_config(params.to_config())
    assert q.v_bar == pytest.approx(params.v_bar, rel=1e-12)
    assert q.omega == pytest.approx(params.omega, rel=1e-12)


def test_flow_matrices(params):
    A, B = flow_matrices(params)
    w2 = params.omega**2
    assert np.array_equal(A, [[0, 1], [w2, 0]])
    assert np.array_equal(B, [0, -w2])


def test_transition_matrix_examples(params):
    assert np.array_equal(transition_matrix(params, 0.0), np.eye(2))
    A, _ = flow_matrices(params)
    assert transition_matrix(params, 0.3) == pytest.approx(expm(A * 0.3), abs=1e-10)
    end = transition_matrix(params, params.T) @ [-params.r_bar, params.v_bar]
    assert end == pytest.approx([params.r_bar, params.v_bar], abs=1e-12)


def test_transition_matrix_group_property(params):
    rng = np.random.default_rng(1)
    for s, t in rng.uniform(-2 * params.T, 2 * params.T, size=(200, 2)):
        Ps, Pt = transition_matrix(params, s), transition_matrix(params, t)
        rhs = transition_matrix(params, s + t)
        # cancellation in the product scales with the factor norms
        scale = np.linalg.norm(Ps, np.inf) * np.linalg.norm(Pt, np.inf)
        assert np.max(np.abs(Ps @ Pt - rhs)) <= 1e-13 * scale
        assert np.linalg.det(transition_matrix(params, t)) == pytest.approx(1.0, abs=1e-12 * np.cosh(params.omega * t) ** 2)


def test_transition_matrix_broadcasts(params):
    ts = np.linspace(0, 1, 5)
    out = transition_matrix(params, ts)
    assert out.shape == (5, 2, 2)
    assert out[3] == pytest.approx(transition_matrix(params, ts[3]))


def test_flow_field_examples():
    p = complete_params(math.sqrt(16.91), r_bar=0.15, T=1.2)
    assert flow_field(p, [0.0, 0.0], 0.0) == pytest.approx([0.0, 0.0])
    assert flow_field(p, [0.1, 0.2], 0.0) == pytest.approx([0.2, 1.691], rel=1e-12)
    assert flow_field(p, [0.1, 0.2], 0.1) == pytest.approx([0.2, 0.0], abs=1e-15)


def test_flow_field_matches_propagation(params):
    x0 = np.array([0.03, 0.4])
    h = 1e-6
    for t in (0.0, 0.5, 1.0):
        x = transition_matrix(params, t) @ x0
        fd = (transition_matrix(params, t + h) @ x0 - transition_matrix(params, t - h) @ x0) / (2 * h)
        assert flow_field(params, x, 0.0) == pytest.approx(fd, abs=1e-8)


def test_jump_map(params):
    assert jump_map(params, [0.15, 0.6]) == pytest.approx([-0.15, 0.6])
    assert jump_map(params, [0.15, -0.1]) == pytest.approx([-0.15, -0.1])
    out = jump_map(params, [params.r_bar, params.v_bar])
    assert out[1] == params.v_bar
    with pytest.raises(NotInJumpSet):
        jump_map(params, [0.1, 0.6])


def test_reference_examples(params):
    assert reference(params, 0.0) == pytest.approx([-params.r_bar, params.v_bar], abs=1e-15)
    assert reference(params, params.T) == pytest.approx([params.r_bar, params.v_bar], abs=1e-12)
    mid = reference(params, params.T / 2)
    assert mid[0] == pytest.approx(0.0, abs=1e-12)
    assert mid[1] == pytest.approx(params.min_speed, rel=1e-12)


def test_reference_midpoint_by_ode(params):
    from scipy.integrate import solve_ivp

    w2 = params.omega**2
    sol = solve_ivp(lambda t, x: [x[1], w2 * x[0]], (0, params.T / 2),
                    [-params.r_bar, params.v_bar], rtol=1e-12, atol=1e-14)
    assert sol.y[:, -1] == pytest.approx(reference(params, params.T / 2), abs=1e-9)


def test_reference_periodic_shift(params):
    diff = reference(params, params.T) - reference(params, 0.0)
    assert diff == pytest.approx([2 * params.r_bar, 0.0], abs=1e-12)


def test_reference_timer_range(params):
    reference(params, -params.T)
    reference(params, 2 * params.T)
    with pytest.raises(TimerOutOfRange):
        reference(params, 2 * params.T + 1e-6)
    with pytest.raises(TimerOutOfRange):
        reference(params, -params.T - 1e-6)


def test_nominal_speed_formula():
    assert nominal_speed(OMEGA, 0.15, 1.2) == pytest.approx(
        periodic_speed_by_bisection(OMEGA, 0.15, 1.2), rel=1e-12)


@pytest.mark.parametrize("field,value", [("z_c", -1.0), ("r_bar", 0.0), ("T", float("nan")),
                                         ("u_bar", 0.0)])
def test_invalid_fields(params, field, value):
    kw = dict(z_c=params.z_c, r_bar=params.r_bar, v_bar=params.v_bar, T=params.T,
              u_bar=params.u_bar)
    kw[field] = value
    with pytest.raises(ValueError):
        ModelParams(**kw)
