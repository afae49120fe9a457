import numpy as np
import pytest

from hybrid_lipm import SimOptions, simulate
from hybrid_lipm.basin import BasinGridSpec, estimate_basin
from hybrid_lipm.model import reference
from hybrid_lipm.simulation import Status, check_monotonicity, quad_form

SMALL = BasinGridSpec(n_p=21, n_v=21)


@pytest.fixture(scope="module")
def small_grid(params, cert, ctl):
    return estimate_basin(params, ctl, cert, SMALL)


def test_origin_cell_has_all_flags(small_grid):
    i = np.flatnonzero(np.isclose(small_grid.eps_v, 0.0))[0]
    k = np.flatnonzero(np.isclose(small_grid.eps_p, 0.0))[0]
    assert small_grid.in_ellipsoid[i, k]
    assert small_grid.lyap_decreasing[i, k]
    assert small_grid.converging[i, k]


def test_nesting(small_grid):
    report = small_grid.nesting_report()
    assert report["violations"] == 0
    assert report["ellipsoid_not_converging"] == 0
    assert report["in_ellipsoid"] < report["converging"]
    assert report["cells"] == 21 * 21


def test_in_ellipsoid_is_definitional(small_grid, cert):
    EP, EV = np.meshgrid(small_grid.eps_p, small_grid.eps_v)
    assert np.array_equal(small_grid.in_ellipsoid, quad_form(cert.P, EP, EV) <= 1.0)


def test_flags_agree_with_scalar_runs(small_grid, params, cert, ctl):
    rng = np.random.default_rng(1)
    tau0 = small_grid.tau0
    for _ in range(8):
        i, k = rng.integers(21, size=2)
        eps0 = np.array([small_grid.eps_p[k], small_grid.eps_v[i]])
        x0 = reference(params, tau0) + eps0
        traj = simulate(params, ctl, x0, tau0, lyap=(cert.P, cert.alpha))
        assert small_grid.converging[i, k] == (traj.status is Status.CONVERGED)
        normal = traj.status in (Status.CONVERGED, Status.HORIZON_REACHED)
        mono = check_monotonicity(traj, cert.P, cert.alpha, params, region="all").passed
        assert small_grid.lyap_decreasing[i, k] == (mono and normal)


def test_chunking_and_workers_do_not_change_result(params, cert, ctl):
    spec = BasinGridSpec(n_p=9, n_v=9)
    base = estimate_basin(params, ctl, cert, spec, horizon=6.0)
    chunked = estimate_basin(params, ctl, cert, spec, horizon=6.0, chunks=4)
    pooled = estimate_basin(params, ctl, cert, spec, horizon=6.0, threads=2, chunks=3)
    for other in (chunked, pooled):
        for name in ("in_ellipsoid", "lyap_decreasing", "converging", "incomplete"):
            assert np.array_equal(getattr(other, name), getattr(base, name))


def test_diverging_is_the_rest(small_grid):
    total = small_grid.converging | small_grid.incomplete | small_grid.diverging
    assert total.all()
    assert not (small_grid.converging & small_grid.diverging).any()


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        BasinGridSpec(n_p=0)
    p, v = BasinGridSpec(n_p=3, n_v=5).axes()
    assert p.tolist() == [-0.15, 0.0, 0.15] and len(v) == 5


def test_custom_options_pass_through(params, cert, ctl):
    grid = estimate_basin(params, ctl, cert, BasinGridSpec(n_p=3, n_v=3),
                          opts=SimOptions(conv_tol=1e-6), horizon=8.0)
    assert grid.converging[1, 1]
