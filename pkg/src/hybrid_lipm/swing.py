"""Polynomial swing-foot references with online time rescaling.

Horizontal components are quintics with rest-to-rest boundary conditions;
the vertical one is a sextic that also passes through the apex height at
mid-step. When the step is predicted to end early or late, the nominal
polynomial is replayed at rate ``phi = T / (t + t_res)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

PHI_MIN, PHI_MAX = 0.2, 5.0


@dataclass(frozen=True)
class SwingSpec:
    p_init: tuple
    p_final: tuple
    p_z_max: float = 0.05
    T: float = 1.2

    def __post_init__(self):
        if not self.p_z_max > 0:
            raise ValueError("p_z_max must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        for name in ("p_init", "p_final"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if abs(v[2]) > 1e-12:
                raise ValueError(f"{name} must start and end on the ground (z = 0)")


@dataclass
class SwingPolynomials:
    """Ascending-power coefficients; ``coeffs_z`` has degree 6."""

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    coeffs_z: np.ndarray
    T: float

    def derivative(self, axis, t, order=0):
        c = {0: self.coeffs_x, 1: self.coeffs_y, 2: self.coeffs_z}[axis]
        return np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(c, order)
                                                if order else c)

    def evaluate(self, t, order=0) -> np.ndarray:
        """Position (``order=0``), velocity or acceleration at ``t``; shape ``(..., 3)``."""
        return np.stack([self.derivative(a, t, order) for a in range(3)], axis=-1)


def _row(t, degree, order):
    """Row of the ``order``-th derivative of the monomials ``1, t, ..., t**degree``."""
    row = np.zeros(degree + 1)
    for n in range(order, degree + 1):
        row[n] = factorial(n) / factorial(n - order) * t ** (n - order)
    return row


def _boundary_system(T, degree, with_apex):
    rows = [_row(0.0, degree, k) for k in range(3)] + [_row(T, degree, k) for k in range(3)]
    if with_apex:
        rows.append(_row(0.5 * T, degree, 0))
    return np.array(rows)


def fit(spec: SwingSpec) -> SwingPolynomials:
    p0 = np.asarray(spec.p_init, dtype=float)
    p1 = np.asarray(spec.p_final, dtype=float)
    M5 = _boundary_system(spec.T, 5, False)
    cx = np.linalg.solve(M5, [p0[0], 0, 0, p1[0], 0, 0])
    cy = np.linalg.solve(M5, [p0[1], 0, 0, p1[1], 0, 0])
    cz = np.linalg.solve(_boundary_system(spec.T, 6, True), [0, 0, 0, 0, 0, 0, spec.p_z_max])
    return SwingPolynomials(cx, cy, cz, spec.T)


def time_scale(t, t_res, T):
    """``phi = T / (t + t_res)``, clamped to ``[0.2, 5]``."""
    if t < 0 or t + t_res <= 0:
        raise ValueError("need t >= 0 and t + t_res > 0")
    return float(np.clip(T / (t + t_res), PHI_MIN, PHI_MAX))


def scaled_eval(poly: SwingPolynomials, t, t_res, T):
    """Position, velocity and acceleration of the rescaled reference at ``t``."""
    phi = time_scale(t, t_res, T)
    s = min(phi * t, poly.T)
    return (poly.evaluate(s), phi * poly.evaluate(s, 1), phi * phi * poly.evaluate(s, 2))
