"""Tracking-error jump maps induced by the position-triggered timer reset.

At a step the error ``eps = x - x_r(tau)`` jumps by ``(delta_1, delta_2)``,
both functions of the position error only. Everything here is vectorized
over ``eps_p``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import AlphaTooSmall
from .model import ModelParams


class JumpDisplacement(NamedTuple):
    delta_1: np.ndarray
    delta_2: np.ndarray


def _kappa(p: ModelParams, eps_p):
    # sqrt(eps_p**2 - 2 r eps_p + a**2) written with a manifestly positive radicand
    gamma = p.speed_margin * (p.a + p.r_bar)
    return np.sqrt((eps_p - p.r_bar) ** 2 + gamma)


def eta_inverse(p: ModelParams, eps_p):
    """``1/eta`` in rationalized form."""
    eps_p = np.asarray(eps_p, dtype=float)
    kappa = _kappa(p, eps_p)
    above = eps_p > p.r_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (p.r_bar - eps_p + kappa) / (p.a + p.r_bar)
        # for eps_p > r_bar the numerator above cancels; flip to the other form
        flipped = p.speed_margin / (eps_p - p.r_bar + kappa)
    return np.where(above, flipped, direct)


def eta(p: ModelParams, eps_p):
    """Positive root ``exp(omega tau_eps)`` of the timer-offset quadratic.

    Strictly increasing, ``eta(0) = 1``, tends to 0 as ``eps_p -> -inf``.
    """
    eps_p = np.asarray(eps_p, dtype=float)
    kappa = _kappa(p, eps_p)
    above = eps_p > p.r_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (eps_p - p.r_bar + kappa) / p.speed_margin
        rational = (p.a + p.r_bar) / (p.r_bar - eps_p + kappa)
    return np.where(above, direct, rational)


def tau_epsilon(p: ModelParams, eps_p):
    """Timer offset ``T - tau`` at a jump with position error ``eps_p``."""
    return np.log(eta(p, eps_p)) / p.omega


def eta_residual(p: ModelParams, eps_p):
    """Residual of ``(a - r) e**2 - 2 (eps_p - r) e - (r + a)`` at ``e = eta(eps_p)``."""
    e = eta(p, eps_p)
    return p.speed_margin * e**2 - 2.0 * (np.asarray(eps_p) - p.r_bar) * e - (p.r_bar + p.a)


def xi(p: ModelParams) -> float:
    """Linear growth rate ``r omega / (v/omega - r)`` of the jump displacement."""
    return p.r_bar * p.omega / p.speed_margin


def jump_displacement(p: ModelParams, eps_p) -> JumpDisplacement:
    """Error increments ``(delta_1, delta_2)`` applied at a step.

    ``delta_1 = r (eta + 1/eta - 2)`` and ``delta_2 = r omega (1/eta - eta)``,
    evaluated as ``r (eta - 1)**2 / eta`` and ``-r omega (eta - 1)(eta + 1)/eta``
    so both vanish cleanly at ``eps_p = 0``.
    """
    e = eta(p, eps_p)
    e_inv = eta_inverse(p, eps_p)
    em1 = e - 1.0
    d1 = p.r_bar * em1 * em1 * e_inv
    d2 = -p.r_bar * p.omega * em1 * (e + 1.0) * e_inv
    return JumpDisplacement(d1, d2)


def delta_alpha(p: ModelParams, eps_p, alpha):
    """``exp(-2 alpha T) eps_p^+ - eps_p``, the timer-weighted position change."""
    if not alpha > p.omega:
        raise AlphaTooSmall(f"alpha={alpha!r} must exceed omega={p.omega!r}")
    eps_p = np.asarray(eps_p, dtype=float)
    d1 = jump_displacement(p, eps_p).delta_1
    return np.exp(-2.0 * alpha * p.T) * (eps_p + d1) - eps_p


def delta_bounds(p: ModelParams, eps_p, alpha=None):
    """Linear-in-``|eps_p|`` bounds on ``|delta_1|``, ``|delta_2|`` (and ``|delta_alpha|``)."""
    mag = np.abs(np.asarray(eps_p, dtype=float))
    x = xi(p)
    out = {"delta_1": 2.0 * x / p.omega * mag, "delta_2": 2.0 * x * mag,
           "pre_jump": np.exp(p.omega * p.T) * mag}
    if alpha is not None:
        out["delta_alpha"] = -np.expm1(-(p.omega + 2.0 * alpha) * p.T) * mag
    return out


def derivative_intervals(p: ModelParams):
    """Closed intervals containing ``d delta_1/d eps_p`` and ``d delta_2/d eps_p``."""
    x = xi(p)
    lo1 = -2.0 * p.r_bar / (p.a + p.r_bar)
    hi2 = -2.0 * p.r_bar * p.omega / (p.a + p.r_bar)
    return {"delta_1": (lo1, 2.0 * x / p.omega), "delta_2": (-2.0 * x, hi2)}
