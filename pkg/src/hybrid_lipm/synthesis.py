"""Convex synthesis of the saturated feedback gains and their Lyapunov certificate.

Decision variables ``(Q, W, U, X, Y)`` give ``K = W Q^-1``, ``L = X / U`` and
``P = Q^-1``. The program maximizes ``log det Q`` under

* ``Q > 0``, ``U > 0``, ``Delta(Q) < 0`` (decrease across steps),
* ``He([[alpha Q + A Q + B W, B (X - U)], [W + Y, X - U]]) < 0`` (decrease along flows),
* ``[[u_bar**2, Y], [Y', Q]] >= 0`` (the ellipsoid stays in the sector region).

The program is homogeneous in ``u_bar**2``, so it is solved for ``u_bar = 1``
and scaled back; strict inequalities carry an explicit margin.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .error_dynamics import xi
from .exceptions import AlphaTooSmall, Infeasible, SolverFailure
from .model import ModelParams, flow_matrices

_HEADROOM = 1.05
_CLARABEL_OPTS = dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11,
                      tol_ktratio=1e-9, max_iter=500)


@dataclass(frozen=True)
class SynthesisProblem:
    params: ModelParams
    alpha: float | None = None
    strictness_margin: float = 1e-7

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.02 * self.params.omega)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not self.strictness_margin > 0:
            raise ValueError("strictness_margin must be positive")


@dataclass
class GainCertificate:
    Q: np.ndarray
    W: np.ndarray
    U: float
    X: float
    Y: np.ndarray
    alpha: float
    K: np.ndarray = None
    L: float = None
    P: np.ndarray = None
    margins: dict = field(default_factory=dict)
    solver_status: str = "unknown"
    model: dict = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float).reshape(2, 2)
        self.W = np.asarray(self.W, dtype=float).reshape(2)
        self.Y = np.asarray(self.Y, dtype=float).reshape(2)
        self.U, self.X, self.alpha = float(self.U), float(self.X), float(self.alpha)
        if self.P is None:
            self.P = np.linalg.inv(self.Q)
        if self.K is None:
            self.K = np.linalg.solve(self.Q, self.W)  # W Q^-1 with Q symmetric
        if self.L is None:
            self.L = self.X / self.U
        self.P = np.asarray(self.P, dtype=float).reshape(2, 2)
        self.K = np.asarray(self.K, dtype=float).reshape(2)
        self.L = float(self.L)

    def scaled(self, s) -> "GainCertificate":
        """Same gains, all decision variables multiplied by ``s``."""
        return GainCertificate(Q=s * self.Q, W=s * self.W, U=s * self.U, X=s * self.X,
                               Y=s * self.Y, alpha=self.alpha, solver_status=self.solver_status,
                               model=self.model)

    def to_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(), "P": self.P.tolist(), "K": self.K.tolist(), "L": self.L,
            "alpha": self.alpha, "margins": dict(self.margins),
            "solver_status": self.solver_status,
            "W": self.W.tolist(), "U": self.U, "X": self.X, "Y": self.Y.tolist(),
            "model": self.model,
        }

    @classmethod
    def from_dict(cls, d) -> "GainCertificate":
        return cls(Q=d["Q"], W=d["W"], U=d["U"], X=d["X"], Y=d["Y"], alpha=d["alpha"],
                   K=d.get("K"), L=d.get("L"), P=d.get("P"),
                   margins=d.get("margins", {}), solver_status=d.get("solver_status", "unknown"),
                   model=d.get("model"))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "GainCertificate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class VerificationReport:
    margins: dict
    passed: bool
    failed: list
    consistency: dict
    condition_numbers: dict

    def to_dict(self) -> dict:
        return {"margins": self.margins, "passed": self.passed, "failed": self.failed,
                "consistency": self.consistency, "condition_numbers": self.condition_numbers}


def _delta_coefficients(p: ModelParams, alpha):
    """Linear maps ``Q -> Delta_ij`` as coefficient dicts over ``q11, q12, q22``."""
    T, w, x = p.T, p.omega, xi(p)
    e2a = np.exp(-2.0 * alpha * T)
    return {
        "11": {"q22": np.expm1(2.0 * (w - alpha) * T), "q11": 4.0 * e2a * x * x,
               "q12": -4.0 * e2a * x * np.exp(w * T)},
        "12": {"q11": 2.0 * e2a * x, "q12": np.expm1(-(w + 2.0 * alpha) * T)},
        "22": {"q11": np.expm1(-2.0 * alpha * T)},
    }


def build_delta(p: ModelParams, alpha, Q):
    """Jump-decrease matrix ``Delta(Q)``; linear (hence homogeneous) in ``Q``."""
    Q = np.asarray(Q, dtype=float)
    q = {"q11": Q[0, 0], "q12": Q[0, 1], "q22": Q[1, 1]}
    c = _delta_coefficients(p, alpha)
    d = {k: sum(coef * q[name] for name, coef in terms.items()) for k, terms in c.items()}
    return np.array([[d["11"], d["12"]], [d["12"], d["22"]]])


def _he_block(p, alpha, Q, W, U, X, Y):
    A, B = flow_matrices(p)
    top_left = alpha * Q + A @ Q + np.outer(B, W)
    M = np.zeros((3, 3))
    M[:2, :2] = top_left
    M[:2, 2] = B * (X - U)
    M[2, :2] = W + Y
    M[2, 2] = X - U
    return M + M.T


def _saturation_block(u_bar, Q, Y):
    S = np.empty((3, 3))
    S[0, 0] = u_bar**2
    S[0, 1:] = Y
    S[1:, 0] = Y
    S[1:, 1:] = Q
    return S


def verify(p: ModelParams, cert: GainCertificate) -> VerificationReport:
    """Re-check every inequality numerically; failures are reported, never raised.

    Margins are smallest eigenvalues of ``Q``, ``-Delta(Q)``, ``-He(...)`` and the
    saturation block, plus ``U`` itself. Strict constraints need a positive
    margin, the saturation block a non-negative one.
    """
    Q = 0.5 * (cert.Q + cert.Q.T)
    delta = build_delta(p, cert.alpha, Q)
    he = _he_block(p, cert.alpha, Q, cert.W, cert.U, cert.X, cert.Y)
    sat_block = _saturation_block(p.u_bar, Q, cert.Y)
    blocks = {"Q": Q, "Delta": -delta, "He": -he, "saturation": sat_block}
    margins = {k: float(np.linalg.eigvalsh(v)[0]) for k, v in blocks.items()}
    margins["U"] = cert.U
    failed = [k for k in ("Q", "U", "Delta", "He") if not margins[k] > 0]
    if not margins["saturation"] >= 0:
        failed.append("saturation")

    P_from_Q = np.linalg.inv(Q)
    consistency = {
        "K_minus_WQinv": float(np.max(np.abs(cert.K - np.linalg.solve(Q, cert.W)))),
        "PQ_minus_I": float(np.max(np.abs(cert.P @ Q - np.eye(2)))),
        "L_minus_X_over_U": float(abs(cert.L - cert.X / cert.U)) if cert.U != 0 else float("inf"),
        "L_below_one": bool(cert.L < 1.0),
        "P_rel_error": float(np.max(np.abs(cert.P - P_from_Q)) / np.max(np.abs(P_from_Q))),
    }
    conds = {k: float(np.linalg.cond(v)) for k, v in blocks.items()}
    return VerificationReport(margins=margins, passed=not failed, failed=failed,
                              consistency=consistency, condition_numbers=conds)


def _lmi_blocks(p, alpha, Q, W, U, X, Y):
    """cvxpy expressions for Delta(Q), the He block and the (u_bar = 1) saturation block."""
    A, B = flow_matrices(p)
    Bc = B.reshape(2, 1)
    c = _delta_coefficients(p, alpha)
    q = {"q11": Q[0, 0], "q12": Q[0, 1], "q22": Q[1, 1]}
    d = {k: sum(coef * q[name] for name, coef in terms.items()) for k, terms in c.items()}
    delta = cp.bmat([[d["11"], d["12"]], [d["12"], d["22"]]])
    xu = cp.reshape(X - U, (1, 1), order="C")
    M = cp.bmat([[alpha * Q + A @ Q + Bc @ W, Bc @ xu], [W + Y, xu]])
    sat_block = cp.bmat([[np.ones((1, 1)), Y], [Y.T, Q]])
    return delta, M + M.T, sat_block


def _variables():
    return (cp.Variable((2, 2), symmetric=True), cp.Variable((1, 2)), cp.Variable(),
            cp.Variable(), cp.Variable((1, 2)))


def _solve(problem):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            problem.solve(solver=cp.CLARABEL, **_CLARABEL_OPTS)
    except cp.SolverError as exc:
        raise SolverFailure(f"conic solver error: {exc}", {"status": "solver_error"}) from exc
    return problem.status


def max_margin(p: ModelParams, alpha) -> float:
    """Largest uniform margin achievable by the strict constraints (normalized units).

    The program is always feasible; a non-positive optimum certifies that no
    strictly feasible gain exists.
    """
    Q, W, U, X, Y = _variables()
    t = cp.Variable()
    delta, he, sat_block = _lmi_blocks(p, alpha, Q, W, U, X, Y)
    cons = [Q >> t * np.eye(2), U >= t, delta << -t * np.eye(2), he << -t * np.eye(3),
            sat_block >> 0, cp.trace(Q) + U <= 1]
    status = _solve(cp.Problem(cp.Maximize(t), cons))
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or t.value is None:
        raise SolverFailure(f"margin probe ended with status {status!r}", {"status": status})
    return float(t.value)


def synthesize(prob: SynthesisProblem) -> GainCertificate:
    """Solve the maxdet program; raises :class:`Infeasible` when ``alpha <= omega``.

    A margin probe runs first so infeasibility is decided by an always-feasible
    program instead of by the solver's infeasibility detection.
    """
    p, alpha, m = prob.params, prob.alpha, prob.strictness_margin
    best = max_margin(p, alpha)
    if best <= m:
        raise Infeasible(
            f"no strictly feasible gains for alpha={alpha:.6g} (omega={p.omega:.6g}); "
            f"best normalized margin {best:.3g} <= {m:.3g}", best_margin=best)

    Q, W, U, X, Y = _variables()
    delta, he, sat_block = _lmi_blocks(p, alpha, Q, W, U, X, Y)
    mh = _HEADROOM * m
    cons = [Q >> mh * np.eye(2), U >= mh, delta << -mh * np.eye(2), he << -mh * np.eye(3),
            sat_block >> mh * np.eye(3)]
    status = _solve(cp.Problem(cp.Maximize(cp.log_det(Q)), cons))
    if Q.value is None:
        raise SolverFailure(f"maxdet solve ended with status {status!r}",
                            {"status": status, "best_margin": best})

    s = p.u_bar**2
    cert = GainCertificate(Q=s * Q.value, W=s * W.value, U=s * float(U.value),
                           X=s * float(X.value), Y=s * Y.value, alpha=alpha,
                           solver_status=status, model=p.to_config())
    report = verify(p, cert)
    cert.margins = report.margins
    if status != cp.OPTIMAL and not report.passed:
        raise SolverFailure(f"maxdet solve ended with status {status!r} and failed verification",
                            {"status": status, "margins": report.margins, "failed": report.failed})
    return cert


def feasibility_witness(p: ModelParams, alpha, q11=1.0):
    """Analytic feasible point: ``q12 = -2 alpha q11``, ``q22`` doubled until ``Delta(Q) < 0``.

    Returns ``(Q, K)`` with ``He((alpha I + A + B K) Q) = diag(-2 alpha q11, -2 alpha q22)``.
    """
    if not alpha > p.omega:
        raise AlphaTooSmall(f"alpha={alpha!r} must exceed omega={p.omega!r}")
    q12 = -2.0 * alpha * q11
    q22 = 8.0 * alpha**2 * q11
    for _ in range(2000):
        Q = np.array([[q11, q12], [q12, q22]])
        if np.linalg.eigvalsh(build_delta(p, alpha, Q))[-1] < 0:
            break
        q22 *= 2.0
    else:
        raise AssertionError("doubling search failed to make Delta(Q) negative definite")
    gap = q22 - 4.0 * alpha**2 * q11
    k1_bar = q22 / q11 + 4.0 * alpha**2 * q22 / gap
    k2_bar = 2.0 * alpha + 2.0 * alpha * q22 / gap
    w2 = p.omega**2
    K = np.array([(k1_bar + w2) / w2, k2_bar / w2])
    return Q, K


def witness_certificate(p: ModelParams, alpha) -> GainCertificate:
    """Complete the analytic witness with ``X = 0``, ``Y = -K Q`` and a small ``U``."""
    Q, K = feasibility_witness(p, alpha)
    # shrink Q until K Q K' <= u_bar**2 (Schur form of the saturation block), with slack
    Q = Q * (0.5 * p.u_bar**2 / float(K @ Q @ K))
    A, B = flow_matrices(p)
    R = alpha * Q + (A + np.outer(B, K)) @ Q
    R = R + R.T
    U = -np.linalg.eigvalsh(R)[-1] / float(B @ B)
    W = K @ Q
    return GainCertificate(Q=Q, W=W, U=U, X=0.0, Y=-W, alpha=alpha, K=K, L=0.0,
                           solver_status="analytic_witness", model=p.to_config())
