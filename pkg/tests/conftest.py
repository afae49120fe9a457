import math

import pytest

from hybrid_lipm import ControllerConfig, SynthesisProblem, complete_params, synthesize

OMEGA = math.sqrt(9.81 / 0.58)

# criterion number -> (passed, line); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def params():
    """Reference gait: r_bar = 0.15 m, T = 1.2 s, z_c = 0.58 m."""
    return complete_params(OMEGA, r_bar=0.15, T=1.2, u_bar=0.075)


@pytest.fixture(scope="session")
def walk_params():
    return complete_params(OMEGA, r_bar=0.1, T=1.2, u_bar=0.075)


@pytest.fixture(scope="session")
def cert(params):
    return synthesize(SynthesisProblem(params, alpha=4.2))


@pytest.fixture(scope="session")
def ctl(params, cert):
    return ControllerConfig.from_certificate(cert, params.u_bar)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k][1])
