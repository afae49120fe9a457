"""INI run configuration (SI units) for the command-line tools.

Sections: ``[model]``, ``[synthesis]``, ``[sim]``, ``[basin]``, ``[mpc]``,
``[walk]``. Unknown sections and keys are rejected; missing required keys
are named in the error.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .basin import BasinGridSpec
from .exceptions import ConfigError, InfeasibleGait
from .lateral_mpc import MpcConfig, Stance
from .model import DEFAULT_G, ModelParams
from .simulation import SimOptions

REQUIRED = object()

SCHEMA = {
    "model": {"g": (float, DEFAULT_G), "z_c": (float, REQUIRED), "u_bar": (float, REQUIRED),
              "r_bar": (float, None), "T": (float, None), "v_bar": (float, None)},
    "synthesis": {"alpha": (float, None), "strictness_margin": (float, 1e-7)},
    "sim": {"x0_p": (float, REQUIRED), "x0_v": (float, REQUIRED), "tau0": (float, REQUIRED),
            "horizon": (float, 15.0), "dt": (float, 1e-3), "event_tol": (float, 1e-10),
            "conv_tol": (float, 1e-3), "conv_window": (float, 1.0),
            "max_jumps_per_second": (int, 10), "hold": (bool, False)},
    "basin": {"eps_p_min": (float, -0.15), "eps_p_max": (float, 0.15),
              "eps_v_min": (float, -1.5), "eps_v_max": (float, 1.5),
              "n_p": (int, 151), "n_v": (int, 151), "tau0": (float, None),
              "horizon": (float, 15.0), "chunks": (int, None)},
    "mpc": {"t_mpc": (float, 0.03), "N": (int, None), "input_weight": (float, 10.0),
            "vel_weight": (float, 0.01), "w_y": (float, 0.1), "y_bar": (float, 0.096)},
    "walk": {"x0_p": (float, REQUIRED), "x0_v": (float, REQUIRED),
             "y0_p": (float, REQUIRED), "y0_v": (float, REQUIRED), "tau0": (float, None),
             "stance": (str, "right"), "n_steps": (int, 4), "p_z_max": (float, 0.05),
             "dt": (float, 1e-3), "max_time": (float, 20.0)},
}


def _convert(section, key, kind, raw):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None


def _parse_section(name, items) -> dict:
    schema = SCHEMA[name]
    unknown = sorted(set(items) - set(schema))
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}")
    out = {}
    for key, (kind, default) in schema.items():
        if key in items:
            out[key] = _convert(name, key, kind, items[key])
        elif default is REQUIRED:
            raise ConfigError(f"[{name}] missing required key '{key}'")
        else:
            out[key] = default
    return out


@dataclass
class RunConfig:
    sections: dict
    path: str | None = None
    _model: ModelParams | None = field(default=None, repr=False)

    def has(self, name) -> bool:
        return name in self.sections

    def section(self, name) -> dict:
        """Parsed section; an absent optional section yields its defaults."""
        if name in self.sections:
            return self.sections[name]
        return _parse_section(name, {})

    def require(self, *names):
        for name in names:
            if name not in self.sections:
                raise ConfigError(f"missing section [{name}]")

    @property
    def model(self) -> ModelParams:
        if self._model is None:
            self.require("model")
            m = self.sections["model"]
            given = [k for k in ("r_bar", "T", "v_bar") if m[k] is not None]
            if len(given) != 2:
                absent = [k for k in ("r_bar", "T", "v_bar") if m[k] is None]
                raise ConfigError(
                    f"[model] needs exactly two of r_bar, T, v_bar; missing key '{absent[0]}'"
                    if len(given) < 2 else "[model] give only two of r_bar, T, v_bar")
            try:
                self._model = ModelParams.from_config({k: v for k, v in m.items() if v is not None})
            except InfeasibleGait:
                raise
            except ValueError as exc:
                raise ConfigError(f"[model] {exc}") from None
        return self._model

    def sim_options(self) -> SimOptions:
        s = self.section("sim") if self.has("sim") else _defaults("sim")
        return SimOptions(dt=s["dt"], event_tol=s["event_tol"], conv_tol=s["conv_tol"],
                          conv_window=s["conv_window"],
                          max_jumps_per_second=s["max_jumps_per_second"], hold=s["hold"])

    def basin_spec(self) -> BasinGridSpec:
        b = self.section("basin")
        return BasinGridSpec(eps_p_range=(b["eps_p_min"], b["eps_p_max"]),
                             eps_v_range=(b["eps_v_min"], b["eps_v_max"]),
                             n_p=b["n_p"], n_v=b["n_v"], tau0=b["tau0"])

    def mpc_config(self) -> MpcConfig:
        m = self.section("mpc")
        kw = dict(w_y=m["w_y"], y_bar=m["y_bar"], input_weight=m["input_weight"],
                  vel_weight=m["vel_weight"])
        try:
            if m["N"] is None:
                return MpcConfig.for_period(self.model.T, t_mpc=m["t_mpc"], **kw)
            return MpcConfig(t_mpc=m["t_mpc"], N=m["N"], **kw)
        except ValueError as exc:
            raise ConfigError(f"[mpc] {exc}") from None

    def walk(self) -> dict:
        self.require("walk")
        w = dict(self.sections["walk"])
        try:
            w["stance"] = Stance(w["stance"].lower())
        except ValueError:
            raise ConfigError(f"[walk] stance must be 'left' or 'right', got {w['stance']!r}") from None
        return w


def _defaults(name):
    """Defaults of a section whose keys are all optional."""
    return {k: (None if d is REQUIRED else d) for k, (_, d) in SCHEMA[name].items()}


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str  # keys are case-sensitive (T vs t)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return parse_sections({s: dict(parser[s]) for s in parser.sections()}, str(path))


def parse_sections(raw: dict, path=None) -> RunConfig:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    return RunConfig({name: _parse_section(name, items) for name, items in raw.items()}, path)
