"""Lateral CoM stabilization with a finite-horizon QP over a footstep plan.

The lateral CoM obeys the same pendulum dynamics as the longitudinal one,
with the CoP ``u_y`` confined to a box around the active foot. Footstep
timing comes from the longitudinal controller: the current step ends after
the predicted residual time, later steps last ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import lsq_linear

from .exceptions import QpInfeasible, SolverFailure
from .model import ModelParams, flow_matrices, transition_matrix
from .simulation import residual_time  # noqa: F401  (footstep timing comes from here)


class Stance(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def other(self) -> "Stance":
        return Stance.RIGHT if self is Stance.LEFT else Stance.LEFT

    @property
    def sign(self) -> float:
        # left foot sits at +y_bar
        return 1.0 if self is Stance.LEFT else -1.0


@dataclass(frozen=True)
class MpcConfig:
    t_mpc: float = 0.03
    N: int = 80
    w_y: float = 0.1
    y_bar: float = 0.096
    input_weight: float = 10.0
    vel_weight: float = 0.01

    def __post_init__(self):
        if not self.t_mpc > 0:
            raise ValueError("t_mpc must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        for name in ("w_y", "input_weight", "vel_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def for_period(cls, T, t_mpc=0.03, **kw) -> "MpcConfig":
        """Horizon of ``2 T``: ``N = ceil(2 T / t_mpc)``."""
        return cls(t_mpc=t_mpc, N=math.ceil(2.0 * T / t_mpc - 1e-9), **kw)


@dataclass
class FootstepPlan:
    z_y: np.ndarray
    durations: list
    stance: list  # stance per sample


def discretize(p: ModelParams, t_mpc):
    """Exact zero-order-hold discretization ``(A_d, B_d)`` over ``t_mpc``."""
    if not t_mpc > 0:
        raise ValueError("t_mpc must be positive")
    _, B = flow_matrices(p)
    Ad = transition_matrix(p, t_mpc)
    # A^{-1} (A_d - I) B, with A^{-1} = [[0, 1/w2], [1, 0]]
    w2 = p.omega ** 2
    M = Ad - np.eye(2)
    Ainv = np.array([[0.0, 1.0 / w2], [1.0, 0.0]])
    return Ad, Ainv @ M @ B


def build_plan(stance: Stance, t, t_res, mpc: MpcConfig, T) -> FootstepPlan:
    """Reference CoP per horizon sample.

    The current foot stays active for ``t_res`` more seconds, then feet
    alternate every ``T``. ``t`` is the time already spent on this step.
    """
    if t < 0 or t_res < 0:
        raise ValueError("t and t_res must be non-negative")
    stance = Stance(stance)
    times = np.arange(mpc.N) * mpc.t_mpc
    # index of the step each sample falls in: 0 for the current one
    k = np.where(times < t_res - 1e-12, 0, 1 + np.floor((times - t_res) / T + 1e-12).astype(int))
    sides = [stance if i % 2 == 0 else stance.other for i in k]
    z = np.array([s.sign for s in sides]) * mpc.y_bar
    n_steps = int(k.max()) + 1
    durations = [t + t_res] + [T] * (n_steps - 1)
    return FootstepPlan(z_y=z, durations=durations, stance=sides)


def prediction_matrices(Ad, Bd, N):
    """Velocity rows ``y_v[k] = Phi[k] y0 + Gamma[k] u`` for ``k = 0..N-1``."""
    Phi = np.zeros((N, 2))
    Gamma = np.zeros((N, N))
    powers = [np.eye(2)]
    for _ in range(N):
        powers.append(Ad @ powers[-1])
    for k in range(N):
        Phi[k] = powers[k][1]
        for i in range(k):
            Gamma[k, i] = (powers[k - 1 - i] @ Bd)[1]
    return Phi, Gamma


class LateralMpc:
    """Condensed QP solved as a bounded least-squares problem.

    Cost ``sum_k vel_weight (y_v[k] - v_ref)^2 + input_weight (u[k] - z[k])^2``
    over ``k = 0..N-1`` with no terminal term; ``y[0]`` is the measured state.
    ``v_ref`` is 0 for lateral balance; the fixed-timing sagittal baseline
    tracks the mean walking speed with it.
    """

    def __init__(self, p: ModelParams, mpc: MpcConfig):
        self.p, self.mpc = p, mpc
        self.Ad, self.Bd = discretize(p, mpc.t_mpc)
        self.Phi, self.Gamma = prediction_matrices(self.Ad, self.Bd, mpc.N)
        N = mpc.N
        self._M = np.vstack([math.sqrt(mpc.vel_weight) * self.Gamma,
                             math.sqrt(mpc.input_weight) * np.eye(N)])

    def solve(self, y_hat, plan: FootstepPlan, v_ref=0.0):
        mpc = self.mpc
        y_hat = np.asarray(y_hat, dtype=float)
        z = np.asarray(plan.z_y, dtype=float)
        if z.shape != (mpc.N,):
            raise ValueError(f"plan covers {z.size} samples, horizon is {mpc.N}")
        lo, hi = z - 0.5 * mpc.w_y, z + 0.5 * mpc.w_y
        if np.any(lo > hi):
            raise QpInfeasible("empty CoP box")
        b = np.concatenate([math.sqrt(mpc.vel_weight) * (v_ref - self.Phi @ y_hat),
                            math.sqrt(mpc.input_weight) * z])
        res = lsq_linear(self._M, b, bounds=(lo, hi), method="bvls", tol=1e-14)
        if not res.success:
            raise SolverFailure(f"bounded least squares failed: {res.message}",
                                {"status": int(res.status)})
        u = np.clip(res.x, lo, hi)
        return self.rollout(y_hat, u), u

    def rollout(self, y0, u):
        Y = np.empty((len(u) + 1, 2))
        Y[0] = y0
        for k, uk in enumerate(u):
            Y[k + 1] = self.Ad @ Y[k] + self.Bd * uk
        return Y


def solve(p: ModelParams, mpc: MpcConfig, y_hat, plan: FootstepPlan, v_ref=0.0):
    """One-shot QP: returns the predicted states ``Y`` (``N + 1`` rows) and inputs."""
    return LateralMpc(p, mpc).solve(y_hat, plan, v_ref)
