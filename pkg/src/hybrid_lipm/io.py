"""CSV artifacts with fixed column order and 12 significant digits."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SCHEMAS = {
    "trajectory": ("t", "j", "x_p", "x_v", "tau", "u", "V", "event"),
    "basin": ("eps_p", "eps_v", "in_ellipsoid", "lyap_decreasing", "converging"),
    "lateral": ("t", "y_p", "y_v", "u_y", "z_y"),
    "swing": ("t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z"),
    "gait_events": ("step", "t_start", "t_end", "duration", "stance", "complete"),
}
_TEXT = {"event", "stance"}
_INT = {"j", "step", "in_ellipsoid", "lyap_decreasing", "converging", "complete"}


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_, int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def write_csv(path, kind, columns: dict):
    """Write equal-length columns under the ``kind`` schema."""
    names = SCHEMAS[kind]
    missing = [n for n in names if n not in columns]
    if missing:
        raise KeyError(f"{kind} csv is missing columns {missing}")
    data = [columns[n] for n in names]
    n = len(data[0])
    if any(len(c) != n for c in data):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([_fmt(v) for v in row])


def read_csv(path, kind=None) -> dict:
    """Read a CSV written by :func:`write_csv` into numpy columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if kind is not None and tuple(header) != SCHEMAS[kind]:
        raise ValueError(f"unexpected header {header} for {kind}")
    out = {}
    for i, name in enumerate(header):
        col = [r[i] for r in body]
        if name in _TEXT:
            out[name] = np.array(col, dtype=str)
        elif name in _INT:
            out[name] = np.array(col, dtype=int)
        else:
            out[name] = np.array(col, dtype=float)
    return out


def trajectory_columns(traj) -> dict:
    return {"t": traj.t, "j": traj.j, "x_p": traj.x[:, 0], "x_v": traj.x[:, 1],
            "tau": traj.tau, "u": traj.u, "V": traj.V,
            "event": np.where(traj.is_jump, "jump", "flow")}


def write_trajectory(path, traj):
    write_csv(path, "trajectory", trajectory_columns(traj))


def write_basin(path, grid):
    EP, EV = np.meshgrid(grid.eps_p, grid.eps_v)
    write_csv(path, "basin", {
        "eps_p": EP.ravel(), "eps_v": EV.ravel(),
        "in_ellipsoid": grid.in_ellipsoid.ravel(), "lyap_decreasing": grid.lyap_decreasing.ravel(),
        "converging": grid.converging.ravel()})


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
