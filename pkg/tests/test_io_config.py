from pathlib import Path

import numpy as np
import pytest

from hybrid_lipm import ConfigError, InfeasibleGait, simulate
from hybrid_lipm.config import load_config, parse_sections
from hybrid_lipm.io import SCHEMAS, read_csv, write_csv, write_trajectory

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_trajectory_csv_round_trip(tmp_path, params, ctl, cert):
    traj = simulate(params, ctl, (-params.r_bar, 1.2 * params.v_bar), params.T / 2,
                    lyap=(cert.P, cert.alpha))
    path = tmp_path / "traj.csv"
    write_trajectory(path, traj)
    back = read_csv(path, "trajectory")
    assert tuple(back) == SCHEMAS["trajectory"]
    assert back["x_p"] == pytest.approx(traj.x[:, 0], rel=1e-11, abs=1e-15)
    assert back["V"] == pytest.approx(traj.V, rel=1e-11, abs=1e-300)
    assert np.array_equal(back["j"], traj.j)
    assert (back["event"] == "jump").sum() == len(traj.jumps)
    assert path.read_text().splitlines()[0] == "t,j,x_p,x_v,tau,u,V,event"


@pytest.mark.parametrize("kind", sorted(SCHEMAS))
def test_every_schema_round_trips(tmp_path, kind):
    rng = np.random.default_rng(0)
    cols = {}
    for name in SCHEMAS[kind]:
        if name in ("event",):
            cols[name] = np.array(["flow", "jump", "flow"])
        elif name == "stance":
            cols[name] = np.array(["left", "right", "left"])
        elif name in ("j", "step", "in_ellipsoid", "lyap_decreasing", "converging", "complete"):
            cols[name] = np.array([0, 1, 1])
        else:
            cols[name] = rng.normal(size=3)
    write_csv(tmp_path / "a.csv", kind, cols)
    back = read_csv(tmp_path / "a.csv", kind)
    for name in SCHEMAS[kind]:
        if cols[name].dtype.kind == "f":
            assert back[name] == pytest.approx(cols[name], rel=1e-11)
        else:
            assert np.array_equal(back[name], cols[name])


def test_missing_column_rejected(tmp_path):
    with pytest.raises(KeyError):
        write_csv(tmp_path / "b.csv", "lateral", {"t": [0.0]})


def test_wrong_header_rejected(tmp_path):
    write_csv(tmp_path / "c.csv", "lateral", {k: [0.0] for k in SCHEMAS["lateral"]})
    with pytest.raises(ValueError):
        read_csv(tmp_path / "c.csv", "swing")


def test_bundled_configs_load():
    gait = load_config(CONFIGS / "gait.ini")
    assert gait.model.v_bar == pytest.approx(0.62583, abs=1e-5)
    assert gait.section("sim")["x0_v"] == pytest.approx(1.2 * gait.model.v_bar, rel=1e-12)
    walk = load_config(CONFIGS / "walk2d.ini")
    assert walk.mpc_config().N == 80
    assert walk.walk()["stance"].value == "right"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        parse_sections({"model": {"z_c": "0.58", "u_bar": "0.075", "r_bar": "0.15", "T": "1.2",
                                  "colour": "red"}})


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="plot"):
        parse_sections({"plot": {}})


def test_missing_key_named():
    with pytest.raises(ConfigError, match="'z_c'"):
        parse_sections({"model": {"u_bar": "0.075", "r_bar": "0.15", "T": "1.2"}})
    cfg = parse_sections({"model": {"z_c": "0.58", "u_bar": "0.075", "r_bar": "0.15"}})
    with pytest.raises(ConfigError, match="'T'"):
        cfg.model


def test_bad_value_reported():
    with pytest.raises(ConfigError, match="z_c"):
        parse_sections({"model": {"z_c": "tall", "u_bar": "0.075"}})


def test_inconsistent_gait_from_config():
    cfg = parse_sections({"model": {"z_c": "0.58", "u_bar": "0.075", "r_bar": "0.15",
                                    "v_bar": "0.552"}})
    with pytest.raises(InfeasibleGait):
        cfg.model


def test_key_case_matters(tmp_path):
    path = tmp_path / "x.ini"
    path.write_text("[model]\nz_c = 0.58\nu_bar = 0.075\nr_bar = 0.15\nt = 1.2\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path)
