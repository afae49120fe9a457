"""Grid estimates of the basin of attraction.

Every cell center ``eps0`` of a rectangular error grid is simulated from
``x_r(tau0) + eps0`` and classified three ways: inside the certified
ellipsoid, weighted Lyapunov function decreasing along the whole run, and
converging. Cells are advanced together by :class:`BatchSimulator`, which
mirrors :class:`~hybrid_lipm.simulation.HybridSimulator` on arrays.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .controller import ControllerConfig, control_components
from .model import ModelParams, reference_components
from .simulation import SimOptions, Status, flow_increase_flags, jump_increase_flags, quad_form

_CODES = list(Status)
_RUNNING = _CODES.index(Status.RUNNING)


def _code(s: Status) -> int:
    return _CODES.index(s)


class BatchSimulator:
    """Advance ``n`` independent closed-loop solutions on a common time grid.

    Same stopping rules as the scalar engine. With ``lyap=(P, alpha)`` the
    weighted Lyapunov function is tracked online; ``flow_violations`` and
    ``jump_violations`` count monotonicity failures per element (flow pairs
    are counted only while the earlier sample is in the ellipsoid when
    ``lyap_region == "ellipsoid"``).
    """

    def __init__(self, p: ModelParams, cfg: ControllerConfig, xp0, xv0, tau0,
                 opts: SimOptions | None = None, horizon=15.0, lyap=None,
                 lyap_region="all", lyap_slack=1e-9):
        self.p, self.cfg = p, cfg
        self.opts = opts or SimOptions()
        self.horizon = float(horizon)
        xp0, xv0, tau0 = np.broadcast_arrays(
            *(np.atleast_1d(np.asarray(a, dtype=float)) for a in (xp0, xv0, tau0)))
        n = xp0.size
        self.n = n
        self.xp, self.xv, self.tau = xp0.astype(float), xv0.astype(float), tau0.astype(float)
        self.t = np.zeros(n)
        self.j = np.zeros(n, dtype=int)
        self.status = np.full(n, _RUNNING)
        self.below_since = np.full(n, np.nan)
        self.u_hold = np.zeros(n)
        self.lyap, self.lyap_region, self.lyap_slack = lyap, lyap_region, lyap_slack
        self.flow_violations = np.zeros(n, dtype=int)
        self.jump_violations = np.zeros(n, dtype=int)
        m = self.opts.max_jumps_per_second
        self._jump_times = np.full((n, m + 1), -np.inf)
        self._k = 0

        r, tol = p.r_bar, self.opts.event_tol
        bad_timer = (tau0 < -p.T - 1e-12) | (tau0 > 2.0 * p.T + 1e-12)
        self.status[bad_timer] = _code(Status.TIMER_RANGE_EXCEEDED)
        outside = (xp0 < -r - tol) | (xp0 > r + tol) | ((xp0 <= -r) & (xv0 < 0))
        self.status[outside & ~bad_timer] = _code(Status.INCOMPLETE)
        run = np.flatnonzero(self.status == _RUNNING)
        self._refresh_hold(run)
        self._V = np.zeros(n)
        if lyap is not None:
            self._V[run] = self._lyap_values(run)
        guard = run[(self.xp[run] >= r - tol) & (self.xv[run] >= 0)]
        if guard.size:
            self._apply_jumps(guard)

    # -- dynamics ------------------------------------------------------------
    def _control(self, xp, xv, tau):
        rp, rv = reference_components(self.p, tau)
        return control_components(self.cfg, xp - rp, xv - rv)

    def _advance(self, idx, h):
        """RK4 on the error dynamics, as in the scalar engine."""
        w2 = self.p.omega ** 2
        tau = self.tau[idx]
        rp, rv = reference_components(self.p, tau)
        ep, ev = self.xp[idx] - rp, self.xv[idx] - rv
        if self.opts.hold:
            u = self.u_hold[idx]
            acc = lambda a, b: w2 * (a - u)  # noqa: E731
        else:
            acc = lambda a, b: w2 * (a - control_components(self.cfg, a, b))  # noqa: E731
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
        rp, rv = reference_components(self.p, tau + h)
        return rp + ep, rv + ev

    def _localize(self, idx, h, guard):
        lo = np.zeros(idx.size)
        hi = h.copy()
        g_lo = guard(self.xp[idx])
        hp, hv = self._advance(idx, hi)
        g_hi = guard(hp)
        todo = g_hi > self.opts.event_tol
        for _ in range(200):
            if not todo.any():
                break
            sub = np.flatnonzero(todo)
            mid = 0.5 * (lo[sub] + hi[sub])
            mp, mv = self._advance(idx[sub], mid)
            g = guard(mp)
            after = g >= 0.0
            a, b = sub[after], sub[~after]
            hi[a], hp[a], hv[a], g_hi[a] = mid[after], mp[after], mv[after], g[after]
            lo[b], g_lo[b] = mid[~after], g[~after]
            todo[sub] = (g_hi[sub] > self.opts.event_tol) & (hi[sub] - lo[sub] > 1e-16)
        # secant polish inside the bracket (see HybridSimulator._localize)
        for _ in range(3):
            with np.errstate(invalid="ignore", divide="ignore"):
                hs = hi - g_hi * (hi - lo) / (g_hi - g_lo)
            ok = (g_hi > 0.0) & (g_lo < 0.0) & (lo < hs) & (hs < hi)
            if not ok.any():
                break
            sub = np.flatnonzero(ok)
            sp, sv = self._advance(idx[sub], hs[sub])
            g = guard(sp)
            better = (g >= 0.0) & (g < g_hi[sub])
            a, b = sub[better], sub[g < 0.0]
            hi[a], hp[a], hv[a], g_hi[a] = hs[a], sp[better], sv[better], g[better]
            lo[b], g_lo[b] = hs[b], g[g < 0.0]
        return hi, hp, hv

    def _refresh_hold(self, idx):
        if self.opts.hold and idx.size:
            self.u_hold[idx] = self._control(self.xp[idx], self.xv[idx], self.tau[idx])

    def _error(self, idx):
        rp, rv = reference_components(self.p, self.tau[idx])
        return self.xp[idx] - rp, self.xv[idx] - rv

    def _lyap_values(self, idx):
        P, alpha = self.lyap
        ep, ev = self._error(idx)
        return np.exp(2.0 * alpha * self.tau[idx]) * quad_form(P, ep, ev)

    def _inside(self, idx):
        ep, ev = self._error(idx)
        return quad_form(self.lyap[0], ep, ev) <= 1.0

    # -- bookkeeping ---------------------------------------------------------
    def _flow_check(self, idx, inside_prev):
        V_new = self._lyap_values(idx)
        bad = flow_increase_flags(self._V[idx], V_new, self.lyap_slack)
        if self.lyap_region == "ellipsoid":
            bad &= inside_prev
        self.flow_violations[idx] += bad
        self._V[idx] = V_new

    def _apply_jumps(self, idx):
        p = self.p
        timer_bad = self.tau[idx] < -1e-12
        self.status[idx[timer_bad]] = _code(Status.TIMER_RANGE_EXCEEDED)
        idx = idx[~timer_bad]
        if not idx.size:
            return
        self.xp[idx] -= 2.0 * p.r_bar
        self.tau[idx] -= p.T
        self.j[idx] += 1
        if self.lyap is not None:
            V_post = self._lyap_values(idx)
            self.jump_violations[idx] += jump_increase_flags(self._V[idx], V_post, self.lyap_slack)
            self._V[idx] = V_post
        self._refresh_hold(idx)

        m1 = self.opts.max_jumps_per_second + 1
        count = self.j[idx]
        self._jump_times[idx, (count - 1) % m1] = self.t[idx]
        oldest = self._jump_times[idx, count % m1]
        zeno = self.t[idx] - oldest < 1.0
        self.status[idx[zeno]] = _code(Status.ZENO)
        if self.opts.stop_after_jumps is not None:
            done = (count >= self.opts.stop_after_jumps) & ~zeno
            self.status[idx[done]] = _code(Status.JUMP_LIMIT)

    # -- stepping ------------------------------------------------------------
    def active(self):
        return np.flatnonzero(self.status == _RUNNING)

    def done(self) -> bool:
        return not np.any(self.status == _RUNNING)

    def step(self):
        idx = self.active()
        if not idx.size:
            return
        r, opts = self.p.r_bar, self.opts
        self._k += 1
        t_grid = self._k * opts.dt
        pending = idx
        while pending.size:
            h = t_grid - self.t[pending]
            live = h > 1e-12
            pending, h = pending[live], h[live]
            if not pending.size:
                break
            inside = self._inside(pending) if self.lyap is not None else None
            np_, nv = self._advance(pending, h)
            fwd = np_ >= r
            back = (np_ < -r - 1e-12) & ~fwd
            plain = ~(fwd | back)

            k = pending[plain]
            self.xp[k], self.xv[k] = np_[plain], nv[plain]
            self.tau[k] += h[plain]
            self.t[k] = t_grid
            if self.lyap is not None and k.size:
                self._flow_check(k, inside[plain])

            for mask, guard, is_fwd in ((back, lambda x: -r - x, False),
                                        (fwd, lambda x: x - r, True)):
                if not mask.any():
                    continue
                k = pending[mask]
                hs, sp, sv = self._localize(k, h[mask], guard)
                self.xp[k], self.xv[k] = sp, sv
                self.t[k] += hs
                self.tau[k] += hs
                if self.lyap is not None:
                    self._flow_check(k, inside[mask])
                if is_fwd:
                    self._apply_jumps(k)
                else:
                    self.status[k] = _code(Status.INCOMPLETE)
            pending = pending[fwd]
            pending = pending[self.status[pending] == _RUNNING]

        on = idx[self.status[idx] == _RUNNING]
        self.t[on] = t_grid
        self._refresh_hold(on)
        self._check_stop(on)

    def _check_stop(self, idx):
        if not idx.size:
            return
        opts = self.opts
        timer_bad = self.tau[idx] > 2.0 * self.p.T + 1e-12
        self.status[idx[timer_bad]] = _code(Status.TIMER_RANGE_EXCEEDED)
        ep, ev = self._error(idx)
        small = np.hypot(ep, ev) < opts.conv_tol
        since = self.below_since[idx]
        since = np.where(small, np.where(np.isnan(since), self.t[idx], since), np.nan)
        self.below_since[idx] = since
        run = self.status[idx] == _RUNNING
        if opts.stop_on_convergence:
            conv = run & small & (self.t[idx] - since >= opts.conv_window - 1e-9)
            self.status[idx[conv]] = _code(Status.CONVERGED)
            run &= ~conv
        at_end = run & (self.t[idx] >= self.horizon - 1e-9)
        self.status[idx[at_end]] = _code(Status.HORIZON_REACHED)

    def run(self):
        while not self.done():
            self.step()
        return self

    def statuses(self) -> list:
        return [_CODES[c] for c in self.status]


@dataclass
class BasinGridSpec:
    eps_p_range: tuple = (-0.15, 0.15)
    eps_v_range: tuple = (-1.5, 1.5)
    n_p: int = 151
    n_v: int = 151
    tau0: float | None = None  # None: T/2

    def __post_init__(self):
        if self.n_p < 1 or self.n_v < 1:
            raise ValueError("grid axes must be non-empty")

    def axes(self):
        return (np.linspace(*self.eps_p_range, self.n_p), np.linspace(*self.eps_v_range, self.n_v))


@dataclass
class BasinGrid:
    """Per-cell flags; arrays are indexed ``[i_v, i_p]``."""

    eps_p: np.ndarray
    eps_v: np.ndarray
    tau0: float
    in_ellipsoid: np.ndarray
    lyap_decreasing: np.ndarray
    converging: np.ndarray
    incomplete: np.ndarray
    lyap_monotone: np.ndarray  # monotonicity alone, whether or not the run ended normally

    @property
    def diverging(self) -> np.ndarray:
        return ~(self.converging | self.incomplete)

    def nesting_report(self) -> dict:
        e, l, c = self.in_ellipsoid, self.lyap_decreasing, self.converging
        return {
            "cells": int(e.size),
            "in_ellipsoid": int(e.sum()),
            "lyap_decreasing": int(l.sum()),
            "converging": int(c.sum()),
            "incomplete": int(self.incomplete.sum()),
            "monotone_but_cut_short": int((self.lyap_monotone & ~self.lyap_decreasing).sum()),
            "ellipsoid_not_lyap": int((e & ~l).sum()),
            "lyap_not_converging": int((l & ~c).sum()),
            "ellipsoid_not_converging": int((e & ~c).sum()),
            "violations": int((e & ~l).sum() + (l & ~c).sum()),
        }


def _sweep_chunk(args):
    p, cfg, P, alpha, xp0, xv0, tau0, opts, horizon = args
    sim = BatchSimulator(p, cfg, xp0, xv0, tau0, opts=opts, horizon=horizon,
                         lyap=(P, alpha), lyap_region="all").run()
    status = sim.status
    normal_end = (status == _code(Status.CONVERGED)) | (status == _code(Status.HORIZON_REACHED))
    monotone = (sim.flow_violations == 0) & (sim.jump_violations == 0)
    return (status == _code(Status.CONVERGED), monotone & normal_end, monotone,
            status == _code(Status.INCOMPLETE))


def estimate_basin(p: ModelParams, cfg: ControllerConfig, cert, spec: BasinGridSpec | None = None,
                   opts: SimOptions | None = None, horizon=15.0, threads=1,
                   chunks=None) -> BasinGrid:
    """Classify a grid of initial errors (default 151 x 151, ``tau0 = T/2``).

    ``lyap_decreasing`` requires the weighted Lyapunov function to be
    non-increasing over every flow sample of the run (not only inside the
    ellipsoid), to drop at every jump, and the run to end normally
    (converged or horizon reached). A solution that stops at the backward
    exit or leaves the timer range is not credited with a decrease. Cells are split into ``chunks``
    batches, run on ``threads`` worker processes and merged by index.
    """
    spec = spec or BasinGridSpec()
    opts = opts or SimOptions()
    tau0 = p.T / 2 if spec.tau0 is None else float(spec.tau0)
    ep_axis, ev_axis = spec.axes()
    EP, EV = np.meshgrid(ep_axis, ev_axis)
    P = np.asarray(cert.P, dtype=float)
    in_ell = quad_form(P, EP, EV) <= 1.0
    rp, rv = reference_components(p, tau0)
    xp0, xv0 = (rp + EP).ravel(), (rv + EV).ravel()

    threads = max(1, int(threads))
    chunks = chunks or threads
    parts = np.array_split(np.arange(xp0.size), chunks)
    jobs = [(p, cfg, P, cert.alpha, xp0[ix], xv0[ix], tau0, opts, horizon) for ix in parts]
    if threads == 1:
        results = [_sweep_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(threads, os.cpu_count() or 1, len(jobs))) as ex:
            results = list(ex.map(_sweep_chunk, jobs))

    conv, lyap_ok, mono, incomplete = (np.empty(xp0.size, dtype=bool) for _ in range(4))
    for ix, (c, l, m, inc) in zip(parts, results):
        conv[ix], lyap_ok[ix], mono[ix], incomplete[ix] = c, l, m, inc
    shape = EP.shape
    return BasinGrid(eps_p=ep_axis, eps_v=ev_axis, tau0=tau0, in_ellipsoid=in_ell,
                     lyap_decreasing=lyap_ok.reshape(shape), converging=conv.reshape(shape),
                     incomplete=incomplete.reshape(shape), lyap_monotone=mono.reshape(shape))
