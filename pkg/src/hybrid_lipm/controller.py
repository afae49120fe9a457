"""Saturated linear feedback on the tracking error with static anti-windup."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sat(s, u_bar):
    return np.minimum(np.maximum(s, -u_bar), u_bar)


def dz(s, u_bar):
    """Deadzone: the part of ``s`` that saturation cuts off."""
    return s - sat(s, u_bar)


@dataclass(frozen=True)
class ControllerConfig:
    K: np.ndarray
    L: float
    u_bar: float

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float).reshape(2)
        object.__setattr__(self, "K", K)
        if not self.u_bar > 0:
            raise ValueError(f"u_bar must be positive, got {self.u_bar!r}")
        if not self.L < 1:
            raise ValueError(f"anti-windup gain L must be < 1, got {self.L!r}")

    @property
    def windup_gain(self) -> float:
        return self.L / (1.0 - self.L)

    @classmethod
    def from_certificate(cls, cert, u_bar) -> "ControllerConfig":
        return cls(K=cert.K, L=cert.L, u_bar=u_bar)

    @classmethod
    def zero(cls, u_bar) -> "ControllerConfig":
        """Open loop: the CoP stays at the foot center."""
        return cls(K=np.zeros(2), L=0.0, u_bar=u_bar)


def control_components(cfg: ControllerConfig, eps_p, eps_v):
    s = cfg.K[0] * eps_p + cfg.K[1] * eps_v
    excess = s - np.minimum(np.maximum(s, -cfg.u_bar), cfg.u_bar)
    arg = s + cfg.windup_gain * excess
    return np.minimum(np.maximum(arg, -cfg.u_bar), cfg.u_bar)


def control(cfg: ControllerConfig, eps):
    """CoP command ``sat(K eps + L/(1-L) dz(K eps))``; ``eps`` has trailing size 2."""
    eps = np.asarray(eps, dtype=float)
    return control_components(cfg, eps[..., 0], eps[..., 1])
