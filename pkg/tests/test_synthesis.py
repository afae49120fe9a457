import numpy as np
import pytest

from hybrid_lipm import (AlphaTooSmall, GainCertificate, Infeasible, SynthesisProblem,
                         feasibility_witness, synthesize, verify, witness_certificate)
from hybrid_lipm.model import flow_matrices
from hybrid_lipm.synthesis import build_delta, max_margin


@pytest.mark.parametrize("ratio", [0.5, 0.9, 1.0])
def test_infeasible_at_or_below_omega(params, ratio):
    with pytest.raises(Infeasible) as info:
        synthesize(SynthesisProblem(params, alpha=ratio * params.omega))
    assert info.value.best_margin <= 1e-7


@pytest.mark.parametrize("ratio", [1.02, 1.1, 2.0])
def test_feasible_above_omega(params, ratio):
    cert = synthesize(SynthesisProblem(params, alpha=ratio * params.omega))
    report = verify(params, cert)
    assert report.passed, report.margins
    assert min(report.margins[k] for k in ("Q", "U", "Delta", "He")) > 0


def test_margin_probe_changes_sign_at_omega(params):
    assert max_margin(params, 0.99 * params.omega) <= 1e-7
    assert max_margin(params, 1.05 * params.omega) > 1e-7


def test_alpha_4_2_certificate(params, cert):
    report = verify(params, cert)
    assert report.passed
    assert cert.L < 1
    assert np.all(np.linalg.eigvalsh(cert.P) > 0)
    assert report.consistency["P_rel_error"] < 1e-8
    assert report.consistency["K_minus_WQinv"] < 1e-8
    assert cert.alpha == 4.2


def test_delta_is_linear(params):
    alpha = 4.2
    assert np.array_equal(build_delta(params, alpha, np.zeros((2, 2))), np.zeros((2, 2)))
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.normal(size=(2, 2))
        Q1, Q2 = M + M.T, rng.normal(size=(2, 2))
        Q2 = Q2 + Q2.T
        a, b = rng.normal(size=2)
        lhs = build_delta(params, alpha, a * Q1 + b * Q2)
        rhs = a * build_delta(params, alpha, Q1) + b * build_delta(params, alpha, Q2)
        assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.parametrize("ratio", [0.3, 0.7, 1.0])
def test_delta11_nonnegative_without_decay(params, ratio):
    # with alpha <= omega and q12 < 0 every addend of the (1,1) entry is non-negative
    rng = np.random.default_rng(5)
    n = 0
    while n < 200:
        M = rng.normal(size=(2, 2))
        Q = M @ M.T + 1e-6 * np.eye(2)
        if Q[0, 1] >= 0:
            continue
        n += 1
        assert build_delta(params, ratio * params.omega, Q)[0, 0] >= 0


def test_witness_diagonalizes_flow_block(params):
    A, B = flow_matrices(params)
    rng = np.random.default_rng(11)
    for alpha in params.omega * rng.uniform(1.001, 4.0, size=100):
        Q, K = feasibility_witness(params, alpha)
        R = alpha * Q + (A + np.outer(B, K)) @ Q
        R = R + R.T
        scale = np.max(np.abs(Q)) * (alpha + params.omega**2 * np.max(np.abs(K)))
        assert abs(R[0, 1]) <= 1e-10 * scale
        assert R[0, 0] == pytest.approx(-2 * alpha * Q[0, 0], rel=1e-9)
        assert R[1, 1] == pytest.approx(-2 * alpha * Q[1, 1], rel=1e-9)
        assert np.linalg.eigvalsh(build_delta(params, alpha, Q))[-1] < 0
        assert np.all(np.linalg.eigvalsh(Q) > 0)


def test_witness_needs_alpha_above_omega(params):
    with pytest.raises(AlphaTooSmall):
        feasibility_witness(params, params.omega)


@pytest.mark.parametrize("ratio", [1.02, 1.5, 3.0])
def test_witness_certificate_verifies(params, ratio):
    report = verify(params, witness_certificate(params, ratio * params.omega))
    assert report.passed, report.margins


def test_verify_flags_only_saturation_when_scaled_up(params, cert):
    big = verify(params, cert.scaled(10.0))
    assert big.failed == ["saturation"]
    small = verify(params, cert.scaled(0.5))
    assert small.passed
    assert small.margins["He"] == pytest.approx(0.5 * cert.margins["He"], rel=1e-6)


def test_scaling_keeps_gains(cert):
    s = cert.scaled(3.0)
    assert s.K == pytest.approx(cert.K, rel=1e-12)
    assert s.L == pytest.approx(cert.L, rel=1e-12)


def test_deterministic(params, cert):
    again = synthesize(SynthesisProblem(params, alpha=4.2))
    assert again.K == pytest.approx(cert.K, rel=1e-10, abs=1e-12)
    assert again.Q == pytest.approx(cert.Q, rel=1e-10, abs=1e-15)


def test_gains_do_not_depend_on_step_length(params, walk_params, cert):
    other = synthesize(SynthesisProblem(walk_params, alpha=4.2))
    assert other.K == pytest.approx(cert.K, rel=1e-6)
    assert other.L == pytest.approx(cert.L, rel=1e-6)


def test_certificate_json_round_trip(tmp_path, cert):
    path = tmp_path / "cert.json"
    cert.to_json(path)
    back = GainCertificate.from_json(path)
    for name in ("Q", "W", "Y", "K", "P"):
        assert np.array_equal(getattr(back, name), getattr(cert, name))
    assert (back.U, back.X, back.L, back.alpha) == (cert.U, cert.X, cert.L, cert.alpha)


def test_default_alpha(params):
    assert SynthesisProblem(params).alpha == pytest.approx(1.02 * params.omega)
    with pytest.raises(ValueError):
        SynthesisProblem(params, alpha=-1.0)
