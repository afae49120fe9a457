"""Event-driven simulation of the closed-loop hybrid walking model.

Flows are integrated with fixed-step RK4 on a uniform grid, applied to the
tracking error (the reference is added back in closed form); crossings of
``x_p = r_bar`` are localized by bisection plus secant polishing on the step
length, the jump ``x -> x + (-2 r_bar, 0)``, ``tau -> tau - T`` is applied,
and integration resumes to the next grid point.

:class:`HybridSimulator` is a scalar engine for one solution (it is also
stepped directly by the walking pipeline). The vectorized sweep engine used
for basin estimates lives in :mod:`hybrid_lipm.basin`.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .controller import ControllerConfig, control_components
from .exceptions import StepNeverCompletes, TimerOutOfRange, ZenoGuardTripped
from .model import ModelParams, reference, reference_components


class Status(str, Enum):
    RUNNING = "Running"
    CONVERGED = "Converged"
    HORIZON_REACHED = "HorizonReached"
    INCOMPLETE = "Incomplete"
    TIMER_RANGE_EXCEEDED = "TimerRangeExceeded"
    JUMP_LIMIT = "JumpLimit"
    ZENO = "ZenoGuardTripped"


@dataclass
class SimOptions:
    dt: float = 1e-3
    event_tol: float = 1e-10
    conv_tol: float = 1e-3
    conv_window: float = 1.0
    max_jumps_per_second: int = 10
    hold: bool = False  # sample-and-hold control at dt instead of continuous feedback
    stop_on_convergence: bool = True
    stop_after_jumps: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.event_tol > 0:
            raise ValueError("event_tol must be positive")


@dataclass
class JumpEvent:
    t: float
    j: int  # arc index before the jump
    pre_x: np.ndarray
    pre_tau: float
    post_x: np.ndarray
    post_tau: float


@dataclass
class HybridTrajectory:
    """Samples over a hybrid time domain.

    Each jump contributes two samples at the same ``t``: the last flow sample
    of arc ``j`` and the first sample of arc ``j + 1`` (``is_jump`` set).
    ``V`` is NaN unless a Lyapunov pair was supplied.
    """

    t: np.ndarray
    j: np.ndarray
    x: np.ndarray
    tau: np.ndarray
    u: np.ndarray
    V: np.ndarray
    is_jump: np.ndarray
    eps: np.ndarray
    jumps: list = field(default_factory=list)
    status: Status = Status.HORIZON_REACHED

    def __len__(self):
        return len(self.t)

    @property
    def final_error_norm(self) -> float:
        return float(np.linalg.norm(self.eps[-1]))

    @property
    def step_durations(self) -> np.ndarray:
        return np.diff([e.t for e in self.jumps])


def lyapunov(P, alpha, x, tau, p: ModelParams):
    """``exp(2 alpha tau) eps' P eps`` with ``eps = x - x_r(tau)``."""
    eps = np.asarray(x, dtype=float) - reference(p, tau)
    quad = np.einsum("...i,ij,...j->...", eps, np.asarray(P, dtype=float), eps)
    return np.exp(2.0 * alpha * np.asarray(tau)) * quad


def quad_form(P, ep, ev):
    return P[0, 0] * ep * ep + 2.0 * P[0, 1] * ep * ev + P[1, 1] * ev * ev


def flow_increase_flags(V_prev, V_next, slack):
    """True where a flow sample pair increases ``V`` by more than ``slack``.

    Above ``V = 1`` the slack is relative, so rounding in large weighted
    values is not mistaken for growth.
    """
    return V_next - V_prev > slack * np.maximum(1.0, V_prev)


def jump_increase_flags(V_pre, V_post, slack):
    """True where a jump fails to strictly decrease ``V`` (both below ``slack`` passes)."""
    return (V_post >= V_pre) & (V_post > slack)


class HybridSimulator:
    """One closed-loop solution, advanced grid step by grid step.

    ``step()`` moves to the next multiple of ``opts.dt`` (handling any jumps
    on the way) and returns the jumps it applied. ``status`` leaves
    ``RUNNING`` once a stopping condition is met.
    """

    def __init__(self, p: ModelParams, cfg: ControllerConfig, x0, tau0,
                 opts: SimOptions | None = None, horizon=15.0, record=True):
        self.p, self.cfg = p, cfg
        self.opts = opts or SimOptions()
        self.horizon = float(horizon)
        self.record = record
        tau0 = float(tau0)
        if not (-p.T - 1e-12 <= tau0 <= 2.0 * p.T + 1e-12):
            raise TimerOutOfRange(f"tau0={tau0!r} outside [-T, 2T]")
        xp, xv = (float(v) for v in np.asarray(x0, dtype=float).reshape(2))
        tol = self.opts.event_tol
        if not (-p.r_bar - tol <= xp <= p.r_bar + tol):
            raise ValueError(f"x0[0]={xp!r} outside [-r_bar, r_bar]")
        self.t, self.j, self.xp, self.xv, self.tau = 0.0, 0, xp, xv, tau0
        self.status = Status.RUNNING
        self.jumps: list[JumpEvent] = []
        self._below_since = None
        self._recent = deque(maxlen=self.opts.max_jumps_per_second + 1)
        self._rows = []
        self._k = 0  # grid index
        self.u_hold = self.control(xp, xv, tau0)
        self._push(False)
        if xp <= -p.r_bar and xv < 0:
            self.status = Status.INCOMPLETE
        elif xp >= p.r_bar - tol and xv >= 0:
            self._jump()

    # -- closed-loop vector field ------------------------------------------
    def _ref(self, tau):
        p = self.p
        wt = p.omega * tau
        c, s = math.cosh(wt), math.sinh(wt)
        return -p.r_bar * c + p.a * s, -p.r_bar * p.omega * s + p.v_bar * c

    def _u(self, ep, ev):
        cfg = self.cfg
        v = cfg.K[0] * ep + cfg.K[1] * ev
        ub = cfg.u_bar
        if v > ub:
            v += cfg.windup_gain * (v - ub)
        elif v < -ub:
            v += cfg.windup_gain * (v + ub)
        return min(max(v, -ub), ub)

    def control(self, xp, xv, tau):
        rp, rv = self._ref(tau)
        return self._u(xp - rp, xv - rv)

    def _advance(self, h):
        """RK4 over ``h`` from the current state; returns ``(x_p, x_v)``.

        The reference is an exact zero-input solution, so the error obeys
        ``d eps/dt = A eps + B u(eps)`` with no forcing. Integrating that
        and adding the closed-form reference keeps ``eps = 0`` exactly
        invariant and avoids truncation error from the fast feedback modes.
        """
        w2 = self.p.omega ** 2
        rp, rv = self._ref(self.tau)
        ep, ev = self.xp - rp, self.xv - rv
        if self.opts.hold:
            u = self.u_hold
            acc = lambda a, b: w2 * (a - u)  # noqa: E731
        else:
            ctl = self._u
            acc = lambda a, b: w2 * (a - ctl(a, b))  # noqa: E731
        h2 = 0.5 * h
        k1v = acc(ep, ev)
        p2, v2 = ep + h2 * ev, ev + h2 * k1v
        k2v = acc(p2, v2)
        p3, v3 = ep + h2 * v2, ev + h2 * k2v
        k3v = acc(p3, v3)
        p4, v4 = ep + h * v3, ev + h * k3v
        k4v = acc(p4, v4)
        h6 = h / 6.0
        ep = ep + h6 * (ev + 2.0 * v2 + 2.0 * v3 + v4)
        ev = ev + h6 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        rp, rv = self._ref(self.tau + h)
        return rp + ep, rv + ev

    def _localize(self, h, guard):
        """Shortest step with ``0 <= guard(x_p) <= event_tol``.

        Bisection brackets the crossing; secant steps inside the bracket then
        pull the guard value down to rounding level, so the timer offset at
        the jump (and the error it induces) is negligible.
        """
        lo, hi = 0.0, h
        g_lo = guard(self.xp)
        hp, hv = self._advance(hi)
        g_hi = guard(hp)
        for _ in range(200):
            if g_hi <= self.opts.event_tol or hi - lo <= 1e-16:
                break
            mid = 0.5 * (lo + hi)
            mp, mv = self._advance(mid)
            g = guard(mp)
            if g >= 0.0:
                hi, hp, hv, g_hi = mid, mp, mv, g
            else:
                lo, g_lo = mid, g
        for _ in range(3):
            if not (g_hi > 0.0 and g_lo < 0.0):
                break
            hs = hi - g_hi * (hi - lo) / (g_hi - g_lo)
            if not lo < hs < hi:
                break
            sp, sv = self._advance(hs)
            g = guard(sp)
            if g >= 0.0:
                if g >= g_hi:
                    break
                hi, hp, hv, g_hi = hs, sp, sv, g
            else:
                lo, g_lo = hs, g
        return hi, hp, hv

    # -- bookkeeping ---------------------------------------------------------
    def _push(self, is_jump):
        if not self.record:
            return
        if self._rows and not is_jump:
            last = self._rows[-1]
            if last[0] == self.t and last[1] == self.j:
                return
        self._rows.append((self.t, self.j, self.xp, self.xv, self.tau, self.u_hold, is_jump))

    def _jump(self):
        p = self.p
        if self.tau < -1e-12:
            # tau^+ would fall below -T
            self.status = Status.TIMER_RANGE_EXCEEDED
            return
        pre = np.array([self.xp, self.xv])
        pre_tau = self.tau
        self.xp -= 2.0 * p.r_bar
        self.tau -= p.T
        self.j += 1
        self.jumps.append(JumpEvent(self.t, self.j - 1, pre, pre_tau,
                                    np.array([self.xp, self.xv]), self.tau))
        # the held command is a CoP offset in the old stance frame; resample
        self.u_hold = self.control(self.xp, self.xv, self.tau)
        self._push(True)
        self._recent.append(self.t)
        if len(self._recent) == self._recent.maxlen and self.t - self._recent[0] < 1.0:
            self.status = Status.ZENO
        elif self.opts.stop_after_jumps is not None and len(self.jumps) >= self.opts.stop_after_jumps:
            self.status = Status.JUMP_LIMIT

    def error(self):
        rp, rv = self._ref(self.tau)
        return self.xp - rp, self.xv - rv

    # -- stepping ------------------------------------------------------------
    def step(self) -> list:
        """Advance to the next grid time; returns the jumps applied on the way."""
        if self.status is not Status.RUNNING:
            return []
        p, opts = self.p, self.opts
        r = p.r_bar
        n_before = len(self.jumps)
        self._k += 1
        t_grid = self._k * opts.dt
        while self.status is Status.RUNNING:
            h = t_grid - self.t
            if h <= 1e-12:
                break
            np_, nv = self._advance(h)
            if np_ >= r:
                hf, fp, fv = self._localize(h, lambda x: x - r)
                self.xp, self.xv, self.t, self.tau = fp, fv, self.t + hf, self.tau + hf
                self._push(False)
                self._jump()
                continue
            if np_ < -r - 1e-12:
                hb, bp, bv = self._localize(h, lambda x: -r - x)
                self.xp, self.xv, self.t, self.tau = bp, bv, self.t + hb, self.tau + hb
                self.status = Status.INCOMPLETE
                self._push(False)
                break
            self.xp, self.xv, self.tau = np_, nv, self.tau + h
            self.t = t_grid
        if self.status is Status.RUNNING:
            self.t = t_grid
            if opts.hold:
                self.u_hold = self.control(self.xp, self.xv, self.tau)
            self._check_stop()
            self._push(False)
        return self.jumps[n_before:]

    def _check_stop(self):
        p, opts = self.p, self.opts
        if self.tau > 2.0 * p.T + 1e-12:
            self.status = Status.TIMER_RANGE_EXCEEDED
            return
        ep, ev = self.error()
        if math.hypot(ep, ev) < opts.conv_tol:
            if self._below_since is None:
                self._below_since = self.t
            if opts.stop_on_convergence and self.t - self._below_since >= opts.conv_window - 1e-9:
                self.status = Status.CONVERGED
                return
        else:
            self._below_since = None
        if self.t >= self.horizon - 1e-9:
            self.status = Status.HORIZON_REACHED

    def run(self):
        while self.status is Status.RUNNING:
            self.step()
        return self

    def trajectory(self, lyap=None) -> HybridTrajectory:
        rows = np.array([r[:6] for r in self._rows], dtype=float).reshape(-1, 6)
        is_jump = np.array([r[6] for r in self._rows], dtype=bool)
        t, j, x, tau = rows[:, 0], rows[:, 1].astype(int), rows[:, 2:4], rows[:, 4]
        rp, rv = reference_components(self.p, tau)
        eps = x - np.column_stack([rp, rv])
        u = rows[:, 5] if self.opts.hold else control_components(self.cfg, eps[:, 0], eps[:, 1])
        V = np.full(len(t), np.nan)
        if lyap is not None:
            P, alpha = lyap
            V = np.exp(2.0 * alpha * tau) * quad_form(np.asarray(P), eps[:, 0], eps[:, 1])
        return HybridTrajectory(t=t, j=j, x=x.copy(), tau=tau, u=np.asarray(u, dtype=float), V=V,
                                is_jump=is_jump, eps=eps, jumps=list(self.jumps),
                                status=self.status)


def simulate(p: ModelParams, cfg: ControllerConfig, x0, tau0, horizon=15.0,
             opts: SimOptions | None = None, lyap=None) -> HybridTrajectory:
    """Integrate one closed-loop solution from ``x0`` with timer ``tau0``.

    Stops at the horizon, on convergence (``|eps| < conv_tol`` for
    ``conv_window`` seconds), on a backward exit through ``x_p = -r_bar``
    (``Incomplete``) or when the timer leaves ``[-T, 2T]``. ``lyap=(P, alpha)``
    fills the ``V`` column.

    Raises
    ------
    ZenoGuardTripped
        More than ``opts.max_jumps_per_second`` jumps within one second.
    """
    sim = HybridSimulator(p, cfg, x0, tau0, opts=opts, horizon=horizon).run()
    if sim.status is Status.ZENO:
        raise ZenoGuardTripped(f"more than {sim.opts.max_jumps_per_second} jumps in one second")
    return sim.trajectory(lyap)


def residual_time(p: ModelParams, cfg: ControllerConfig, eps, tau, dt=1e-3) -> float:
    """Predicted time until the current step ends (``x_p`` reaches ``r_bar``).

    The closed-loop longitudinal dynamics are simulated from
    ``x = x_r(tau) + eps``; a guard of ``3 T`` bounds the search.
    """
    x = reference(p, tau) + np.asarray(eps, dtype=float)
    if x[0] >= p.r_bar - 1e-10:
        return 0.0
    opts = SimOptions(dt=dt, stop_on_convergence=False, stop_after_jumps=1)
    sim = HybridSimulator(p, cfg, x, tau, opts=opts, horizon=3.0 * p.T, record=False)
    while sim.status is Status.RUNNING:
        sim.step()
    if sim.jumps:
        return float(sim.jumps[0].t)
    if sim.status is Status.TIMER_RANGE_EXCEEDED and sim.xp >= p.r_bar - 2 * sim.opts.event_tol:
        return float(sim.t)  # reached the guard but the timer reset would be out of range
    raise StepNeverCompletes(
        f"step does not complete within {3 * p.T:g} s (status {sim.status.value})")


@dataclass
class MonotonicityReport:
    passed: bool
    flow_violations: list
    jump_violations: list
    max_flow_increase: float
    left_ellipsoid: bool

    def to_dict(self):
        return {"passed": self.passed, "flow_violations": len(self.flow_violations),
                "jump_violations": len(self.jump_violations),
                "max_flow_increase": self.max_flow_increase,
                "left_ellipsoid": self.left_ellipsoid}


def check_monotonicity(traj: HybridTrajectory, P, alpha, p: ModelParams, slack=1e-9,
                       region="ellipsoid") -> MonotonicityReport:
    """Check that the weighted Lyapunov function decreases along ``traj``.

    Flow sample pairs are checked for non-increase when the earlier sample is
    inside the ellipsoid ``eps' P eps <= 1`` (``region="ellipsoid"``) or
    everywhere (``region="all"``); every jump must strictly decrease ``V``.
    """
    if region not in ("ellipsoid", "all"):
        raise ValueError(f"unknown region {region!r}")
    P = np.asarray(P, dtype=float)
    q = quad_form(P, traj.eps[:, 0], traj.eps[:, 1])
    V = np.exp(2.0 * alpha * traj.tau) * q
    inside = q <= 1.0
    jump = traj.is_jump[1:]
    bad_jump = jump & jump_increase_flags(V[:-1], V[1:], slack)
    checked = ~jump
    if region == "ellipsoid":
        checked &= inside[:-1]
    bad_flow = checked & flow_increase_flags(V[:-1], V[1:], slack)
    inc = np.where(checked, V[1:] - V[:-1], 0.0)
    return MonotonicityReport(
        passed=not (bad_flow.any() or bad_jump.any()),
        flow_violations=(np.flatnonzero(bad_flow) + 1).tolist(),
        jump_violations=(np.flatnonzero(bad_jump) + 1).tolist(),
        max_flow_increase=float(max(inc.max(initial=0.0), 0.0)),
        left_ellipsoid=bool(np.any(~inside)))
