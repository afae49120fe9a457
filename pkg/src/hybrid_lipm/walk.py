"""Combined sagittal/lateral walking loop on the reduced-order model.

The sagittal CoM runs on the hybrid model with the saturated feedback in
1 ms sample-and-hold; every MPC tick the residual time of the current step is
predicted and fed both to the lateral footstep plan and to the swing-foot
time scaling. A foot switch also triggers an immediate lateral re-solve so
the CoP never sits in the box of a foot that has left the ground.

Coordinates: foot ``k`` is at ``x = 2 r_bar k`` (the initial stance foot is
``k = 0``), left feet at ``y = +y_bar``, right feet at ``-y_bar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerConfig
from .exceptions import HybridLipmError
from .lateral_mpc import FootstepPlan, LateralMpc, MpcConfig, Stance, build_plan, discretize
from .model import ModelParams
from .simulation import HybridSimulator, SimOptions, Status, residual_time
from .swing import SwingSpec, fit, scaled_eval


@dataclass
class WalkResult:
    longitudinal: dict
    lateral: dict
    swing: dict
    gait_events: dict
    status: str
    summary: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "Completed"


class _Columns:
    def __init__(self, *names):
        self.names = names
        self.data = {n: [] for n in names}

    def add(self, *values):
        for n, v in zip(self.names, values):
            self.data[n].append(v)

    def arrays(self):
        return {n: np.asarray(v) for n, v in self.data.items()}


def _gait_table(starts, ends, stances, complete):
    return {"step": np.arange(len(starts)), "t_start": np.asarray(starts),
            "t_end": np.asarray(ends), "duration": np.asarray(ends) - np.asarray(starts),
            "stance": np.array([s.value for s in stances], dtype=str),
            "complete": np.asarray(complete, dtype=int)}


def _swing_spec(p, mpc, j, stance, p_z_max):
    """Swing foot of step ``j``: from foot ``j - 1`` to foot ``j + 1`` on the free side."""
    side = stance.other.sign * mpc.y_bar
    return SwingSpec((2.0 * p.r_bar * (j - 1), side, 0.0), (2.0 * p.r_bar * (j + 1), side, 0.0),
                     p_z_max=p_z_max, T=p.T)


def run_walk(p: ModelParams, cfg: ControllerConfig, mpc: MpcConfig, x0, y0, tau0=None,
             stance=Stance.RIGHT, n_steps=4, p_z_max=0.05, dt=1e-3, max_time=20.0,
             lyap=None) -> WalkResult:
    """Walk until ``n_steps`` full steps after the initial partial one are done."""
    tau0 = p.T / 2 if tau0 is None else float(tau0)
    stance = Stance(stance)
    ticks_per_mpc = round(mpc.t_mpc / dt)
    if abs(ticks_per_mpc * dt - mpc.t_mpc) > 1e-9:
        raise ValueError("t_mpc must be a multiple of dt")
    lon = HybridSimulator(p, cfg, x0, tau0, opts=SimOptions(dt=dt, hold=True,
                                                           stop_on_convergence=False),
                          horizon=max_time)
    lat = LateralMpc(p, mpc)
    Ad1, Bd1 = discretize(p, dt)
    y = np.asarray(y0, dtype=float).copy()

    lat_cols = _Columns("t", "y_p", "y_v", "u_y", "z_y")
    sw_cols = _Columns("t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z")
    step_start, starts, ends, stances, complete = -tau0, [0.0], [], [stance], []
    poly = fit(_swing_spec(p, mpc, 0, stance, p_z_max))
    u_y = z_y = 0.0
    t_res, t_res_at = p.T - tau0, 0.0
    cop_violations, tres_failures = 0, 0
    status = "Completed"

    def mpc_tick(t):
        nonlocal u_y, z_y, t_res, t_res_at, tres_failures
        ep, ev = lon.error()
        try:
            t_res = residual_time(p, cfg, (ep, ev), lon.tau, dt=dt)
        except HybridLipmError:
            tres_failures += 1
            t_res = max(p.T - lon.tau, 0.0)
        t_res_at = t
        # the stance foot stays planned until the switch is actually detected;
        # the switch itself triggers a re-solve
        plan = build_plan(stance, max(t - step_start, 0.0), max(t_res, dt), mpc, p.T)
        _, U = lat.solve(y, plan)
        u_y, z_y = float(U[0]), float(plan.z_y[0])

    def record(t):
        nonlocal cop_violations
        lat_cols.add(t, y[0], y[1], u_y, z_y)
        if abs(u_y - stance.sign * mpc.y_bar) > 0.5 * mpc.w_y + 1e-12:
            cop_violations += 1
        t_in = t - step_start
        remaining = max(t_res - (t - t_res_at), 0.0)
        if t_in + remaining <= 0:
            remaining = dt
        pos, vel, _ = scaled_eval(poly, t_in, remaining, p.T)
        sw_cols.add(t, *pos, *vel)

    mpc_tick(0.0)
    record(0.0)
    k = 0
    while True:
        jumps = lon.step()
        k += 1
        y = Ad1 @ y + Bd1 * u_y
        t = lon.t
        for ev in jumps:
            ends.append(ev.t)
            complete.append(len(ends) > 1)
            stance = stance.other
            step_start = ev.t
            starts.append(ev.t)
            stances.append(stance)
            poly = fit(_swing_spec(p, mpc, ev.j + 1, stance, p_z_max))
        if lon.status is not Status.RUNNING:
            status = f"Longitudinal{lon.status.value}"
            break
        if len(ends) >= n_steps + 1:
            break
        if t >= max_time - 1e-9:
            status = "TimeLimit"
            break
        if jumps or k % ticks_per_mpc == 0:
            mpc_tick(t)
        record(t)

    traj = lon.trajectory(lyap)
    starts = starts[:len(ends)]
    gait = _gait_table(starts, ends, stances[:len(ends)], complete)
    lat_arr = lat_cols.arrays()
    full = gait["duration"][gait["complete"] == 1]
    jump_t = np.array([e.t for e in traj.jumps])
    summary = {
        "status": status,
        "steps_completed": int(len(full)),
        "step_durations": full.tolist(),
        "first_partial_step": float(ends[0]) if ends else None,
        "first_step_duration": float(full[0]) if len(full) else None,
        "nominal_T": p.T,
        "cop_box_violations": int(cop_violations),
        "residual_time_fallbacks": int(tres_failures),
        "mean_y_p": float(np.mean(lat_arr["y_p"])),
        "max_abs_y_p": float(np.max(np.abs(lat_arr["y_p"]))),
        "durations_match_jumps": bool(np.allclose(np.diff(jump_t), full, atol=1e-12))
        if len(full) else True,
        "final_error_norm": traj.final_error_norm,
    }
    from .io import trajectory_columns

    return WalkResult(trajectory_columns(traj), lat_arr, sw_cols.arrays(), gait, status, summary)


def run_fixed_timing(p: ModelParams, mpc: MpcConfig, x0, y0, tau0=None, stance=Stance.RIGHT,
                     n_steps=4, p_z_max=0.05, dt=1e-3, max_time=20.0) -> WalkResult:
    """Classic baseline: both axes run MPC over fixed footsteps with fixed duration ``T``.

    The sagittal MPC tracks the mean speed ``2 r_bar / T`` with the CoP
    confined to ``+-u_bar`` around the stance foot and reuses the lateral
    weights. Steps switch on the clock; the CoM diverges when it gets more
    than ``3 r_bar`` ahead of or behind the stance foot.
    """
    tau0 = p.T / 2 if tau0 is None else float(tau0)
    stance = Stance(stance)
    ticks_per_mpc = round(mpc.t_mpc / dt)
    sag_cfg = MpcConfig(t_mpc=mpc.t_mpc, N=mpc.N, w_y=2.0 * p.u_bar, y_bar=0.0,
                        input_weight=mpc.input_weight, vel_weight=mpc.vel_weight)
    sag, lat = LateralMpc(p, sag_cfg), LateralMpc(p, mpc)
    Ad1, Bd1 = discretize(p, dt)
    X = np.asarray(x0, dtype=float).copy()  # global, foot 0 at the origin
    y = np.asarray(y0, dtype=float).copy()
    v_mean = 2.0 * p.r_bar / p.T
    foot, step_start = 0, -tau0
    starts, ends, stances, complete = [0.0], [], [stance], []
    poly = fit(_swing_spec(p, mpc, 0, stance, p_z_max))
    lon_cols = _Columns("t", "j", "x_p", "x_v", "tau", "u", "V", "event")
    lat_cols = _Columns("t", "y_p", "y_v", "u_y", "z_y")
    sw_cols = _Columns("t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z")
    u_x = u_y = z_y = 0.0
    status = "Completed"

    def tick(t):
        nonlocal u_x, u_y, z_y
        t_in = max(t - step_start, 0.0)
        t_res = max(p.T - t_in, 0.0)
        plan_y = build_plan(stance, t_in, t_res, mpc, p.T)
        # sagittal foot index advances with every planned switch
        times = np.arange(mpc.N) * mpc.t_mpc
        idx = np.where(times < t_res - 1e-12, 0,
                       1 + np.floor((times - t_res) / p.T + 1e-12).astype(int))
        plan_x = FootstepPlan(z_y=2.0 * p.r_bar * (foot + idx), durations=plan_y.durations,
                              stance=plan_y.stance)
        _, Ux = sag.solve(X, plan_x, v_ref=v_mean)
        _, Uy = lat.solve(y, plan_y)
        u_x, u_y, z_y = float(Ux[0]), float(Uy[0]), float(plan_y.z_y[0])

    def record(t, event="flow"):
        xf = 2.0 * p.r_bar * foot
        lon_cols.add(t, foot, X[0] - xf, X[1], math.nan, u_x - xf, math.nan, event)
        lat_cols.add(t, y[0], y[1], u_y, z_y)
        t_in = t - step_start
        pos, vel, _ = scaled_eval(poly, max(t_in, 0.0), max(p.T - t_in, 1e-9), p.T)
        sw_cols.add(t, *pos, *vel)

    tick(0.0)
    record(0.0)
    k = 0
    next_switch = p.T - tau0
    while True:
        k += 1
        t = k * dt
        X = Ad1 @ X + Bd1 * u_x
        y = Ad1 @ y + Bd1 * u_y
        switched = t >= next_switch - 1e-9
        if switched:
            record(t)
            ends.append(t)
            complete.append(len(ends) > 1)
            foot += 1
            stance = stance.other
            step_start = t
            next_switch += p.T
            starts.append(t)
            stances.append(stance)
            poly = fit(_swing_spec(p, mpc, foot, stance, p_z_max))
        if abs(X[0] - 2.0 * p.r_bar * foot) > 3.0 * p.r_bar:
            status = "Diverged"
            record(t)
            break
        if len(ends) >= n_steps + 1:
            break
        if t >= max_time - 1e-9:
            status = "TimeLimit"
            break
        if switched or k % ticks_per_mpc == 0:
            tick(t)
        record(t, "jump" if switched else "flow")

    lon = lon_cols.arrays()
    starts = starts[:len(ends)]
    gait = _gait_table(starts, ends, stances[:len(ends)], complete)
    lat_arr = lat_cols.arrays()
    summary = {
        "status": status, "baseline": "fixed-timing",
        "steps_completed": int(gait["complete"].sum()),
        "step_durations": gait["duration"][gait["complete"] == 1].tolist(),
        "max_com_offset": float(np.max(np.abs(lon["x_p"]))),
        "mean_y_p": float(np.mean(lat_arr["y_p"])),
        "max_abs_y_p": float(np.max(np.abs(lat_arr["y_p"]))),
    }
    return WalkResult(lon, lat_arr, sw_cols.arrays(), gait, status, summary)
