"""Longitudinal LIPM with a frame shift at every step.

The CoM position ``x_p`` is measured from the center of the stance foot and
lives in ``[-r_bar, r_bar]``. Flows follow ``x_ddot = omega**2 (x_p - u)``;
when ``x_p`` reaches ``r_bar`` the frame moves to the new foot,
``x_p -> x_p - 2 r_bar``. States are plain ``(x_p, x_v)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import InfeasibleGait, NotInJumpSet, TimerOutOfRange

DEFAULT_G = 9.81
JUMP_SET_TOL = 1e-9
_TIMER_SLACK = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Physical and gait constants, SI units.

    ``omega`` is derived from ``g`` and ``z_c``. The triple
    ``(r_bar, v_bar, T)`` must describe a periodic gait; use
    :func:`complete_params` to build one from any two of them.
    """

    z_c: float
    r_bar: float
    v_bar: float
    T: float
    u_bar: float
    g: float = DEFAULT_G
    omega: float = field(init=False)

    def __post_init__(self):
        for name in ("z_c", "r_bar", "T", "u_bar", "g"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        object.__setattr__(self, "omega", math.sqrt(self.g / self.z_c))
        if not self.v_bar / self.omega - self.r_bar > 0:
            raise InfeasibleGait(
                f"v_bar/omega - r_bar = {self.v_bar / self.omega - self.r_bar:.3g} must be > 0"
            )
        expected = nominal_speed(self.omega, self.r_bar, self.T)
        if abs(self.v_bar - expected) > 1e-9 * expected:
            raise InfeasibleGait(
                f"(r_bar, v_bar, T) is not a periodic gait: v_bar={self.v_bar!r}, "
                f"periodicity requires {expected!r}"
            )

    @property
    def speed_margin(self) -> float:
        """``v_bar/omega - r_bar``, evaluated without cancellation."""
        return 2.0 * self.r_bar / math.expm1(self.omega * self.T)

    @property
    def a(self) -> float:
        """``v_bar/omega``: the speed expressed as a length."""
        return self.v_bar / self.omega

    @property
    def min_speed(self) -> float:
        """Reference velocity at mid-stance (``tau = T/2``)."""
        return self.v_bar / math.cosh(0.5 * self.omega * self.T)

    def to_config(self) -> dict:
        return {"g": self.g, "z_c": self.z_c, "r_bar": self.r_bar, "T": self.T,
                "u_bar": self.u_bar}

    @classmethod
    def from_config(cls, section) -> "ModelParams":
        """Build from a ``[model]`` mapping with keys g, z_c, r_bar, T or v_bar, u_bar."""
        g = float(section.get("g", DEFAULT_G))
        z_c = float(section["z_c"])
        omega = math.sqrt(g / z_c)
        known = {k: float(section[k]) for k in ("r_bar", "v_bar", "T") if k in section}
        return complete_params(omega, g=g, u_bar=float(section["u_bar"]), **known)


class FlowMatrices(NamedTuple):
    A: np.ndarray
    B: np.ndarray


def nominal_speed(omega, r_bar, T):
    """Peak speed of the periodic gait, ``omega r_bar coth(omega T / 2)``."""
    return omega * r_bar / math.tanh(0.5 * omega * T)


def complete_params(omega, *, r_bar=None, v_bar=None, T=None, g=DEFAULT_G,
                    u_bar=0.075) -> ModelParams:
    """Solve the periodicity relation for the missing gait parameter.

    Exactly two of ``r_bar``, ``v_bar`` and ``T`` must be given.

    Raises
    ------
    InfeasibleGait
        If the given pair admits no gait with ``v_bar/omega > r_bar``.
    """
    given = {k: v for k, v in (("r_bar", r_bar), ("v_bar", v_bar), ("T", T)) if v is not None}
    if len(given) != 2:
        raise ValueError(f"exactly two of r_bar, v_bar, T are required, got {sorted(given)}")
    if not omega > 0:
        raise ValueError("omega must be positive")
    for name, value in given.items():
        if not value > 0:
            raise InfeasibleGait(f"{name} must be positive, got {value!r}")

    if T is None:
        a = v_bar / omega
        if not a - r_bar > 0:
            raise InfeasibleGait(
                f"v_bar/omega - r_bar = {a - r_bar:.3g} <= 0: the log argument is non-positive"
            )
        T = math.log1p(2.0 * r_bar / (a - r_bar)) / omega
        # Re-derive v_bar so the stored triple is consistent to rounding.
        v_bar = nominal_speed(omega, r_bar, T)
    elif v_bar is None:
        v_bar = nominal_speed(omega, r_bar, T)
    else:
        r_bar = v_bar * math.tanh(0.5 * omega * T) / omega
    return ModelParams(z_c=float(g / omega**2), r_bar=float(r_bar), v_bar=float(v_bar),
                       T=float(T), u_bar=float(u_bar), g=float(g))


def flow_matrices(p: ModelParams) -> FlowMatrices:
    w2 = p.omega**2
    return FlowMatrices(np.array([[0.0, 1.0], [w2, 0.0]]), np.array([0.0, -w2]))


def transition_matrix(p: ModelParams, t):
    """Closed-form ``expm(A t)``; broadcasts over ``t`` (result shape ``t.shape + (2, 2)``)."""
    t = np.asarray(t, dtype=float)
    wt = p.omega * t
    c, s = np.cosh(wt), np.sinh(wt)
    out = np.empty(t.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s / p.omega
    out[..., 1, 0] = p.omega * s
    out[..., 1, 1] = c
    return out


def flow_field(p: ModelParams, x, u):
    """Time derivative ``(x_v, omega**2 (x_p - u))`` of the planar state."""
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., 1], p.omega**2 * (x[..., 0] - u)], axis=-1)


def jump_map(p: ModelParams, x, tol=JUMP_SET_TOL):
    """Shift the frame to the new stance foot: ``(x_p - 2 r_bar, x_v)``."""
    x = np.asarray(x, dtype=float)
    if abs(x[0] - p.r_bar) > tol:
        raise NotInJumpSet(f"x_p = {x[0]!r} is not at r_bar = {p.r_bar!r} (tol {tol:g})")
    return np.array([x[0] - 2.0 * p.r_bar, x[1]])


def reference_components(p: ModelParams, tau):
    """Unchecked ``(x_p, x_v)`` of the timer-parametrized reference."""
    wt = p.omega * tau
    c, s = np.cosh(wt), np.sinh(wt)
    return -p.r_bar * c + p.a * s, -p.r_bar * p.omega * s + p.v_bar * c


def reference(p: ModelParams, tau):
    """Reference state ``expm(A tau) @ (-r_bar, v_bar)`` for ``tau`` in ``[-T, 2T]``."""
    tau_arr = np.asarray(tau, dtype=float)
    lo, hi = -p.T - _TIMER_SLACK, 2.0 * p.T + _TIMER_SLACK
    if np.any(tau_arr < lo) or np.any(tau_arr > hi):
        raise TimerOutOfRange(f"tau must lie in [-T, 2T] = [{-p.T}, {2 * p.T}]")
    xp, xv = reference_components(p, tau_arr)
    return np.stack([xp, xv], axis=-1)
