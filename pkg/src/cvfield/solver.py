"""PSD-constrained least squares via ADMM.

The training problem is

    minimize   ||A theta - b||^2 + lam ||theta||^2
    subject to C_i(theta) + tau_i I  <=  0        (negative semidefinite)

for i = 1..m constraint points, where C_i is the linear map
C_i(theta) = sum_j theta_j E_ij built from symmetrized per-component
feature Jacobians E_ij.  Splitting on the slack matrices
S_i = -C_i(theta) - tau_i I >= 0 gives a three-step scaled-form ADMM:

    1. theta <- solve  (2 A^T A + 2 lam I + rho sum_i C_i* C_i) theta
                     = 2 A^T b + rho sum_i C_i*(-tau_i I - M_i - U_i)
       (the system matrix is factored once and reused)
    2. M_i  <- psd_project(-C_i(theta) - tau_i I - U_i)
    3. U_i  <- U_i + M_i + C_i(theta) + tau_i I

With slack_weight w > 0 the constraints soften to
-C_i(theta) - tau_i I + s_i I >= 0 with s_i >= 0 penalized by w s_i^2;
the scalar slacks join the quadratic step and project onto the
nonnegative orthant through a second splitting variable.

All updates are deterministic dense linear algebra: identical inputs and
settings reproduce bitwise-identical iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import features
from .errors import DimensionError, NumericalError


@dataclass
class ConstrainedLSQProblem:
    design: np.ndarray            # A, (N n, feature_dim)
    targets: np.ndarray           # b, (N n,)
    lam: float
    constraint_points: np.ndarray  # (m, n)
    constraint_ops: np.ndarray     # (m, feature_dim, n, n), symmetric in the last two axes
    tau: np.ndarray                # (m,)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("ridge weight lam must be positive")
        if self.design.shape[0] != self.targets.shape[0]:
            raise DimensionError("design and targets disagree on row count")
        if self.constraint_ops.shape[0] != self.tau.shape[0]:
            raise DimensionError("one tau per constraint point required")
        if self.constraint_ops.shape[0] and self.constraint_ops.shape[1] != self.design.shape[1]:
            raise DimensionError("constraint operators disagree with the design width")


@dataclass
class ADMMSettings:
    rho: float = 1.0
    max_iters: int = 4000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    slack_weight: float = 0.0   # 0 = hard constraints
    adapt_rho: bool = False     # residual balancing (x2 / /2 at ratio > 10)


@dataclass
class SolveReport:
    theta: np.ndarray
    iters: int
    primal_residual: float
    dual_residual: float
    objective: float
    max_constraint_violation: float
    converged: bool
    slacks: np.ndarray | None = None
    al_values: np.ndarray = field(default=None, repr=False)


def assemble_problem(fm, proj, pairs, cpoints, lam, tau):
    """Build the regression design and constraint operators.

    `pairs` is a list of (position, velocity) tuples or a (X, Xdot) pair of
    arrays; `cpoints` the constraint points; `tau` the scalar contraction
    rate applied at every constraint point.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2:
        X, Xdot = (np.atleast_2d(np.asarray(a, dtype=float)) for a in pairs)
    else:
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != 2:
            raise DimensionError("pairs must be (X, Xdot) or a list of (x, xdot)")
        X, Xdot = arr[:, 0, :], arr[:, 1, :]
    if X.shape != Xdot.shape or X.shape[1] != fm.n:
        raise DimensionError("positions and velocities must be (N, n) with n matching the map")
    A = features.feature_rows(fm, X) @ proj.L
    cpoints = np.asarray(cpoints, dtype=float).reshape(-1, fm.n) if np.size(cpoints) else np.empty((0, fm.n))
    if cpoints.shape[0]:
        ops = np.stack([features.symmetrized_jacobian_basis(fm, proj, c) for c in cpoints])
    else:
        ops = np.empty((0, fm.feature_dim, fm.n, fm.n))
    return ConstrainedLSQProblem(A, Xdot.ravel(), float(lam), cpoints, ops,
                                 np.full(cpoints.shape[0], float(tau)))


def psd_project(M):
    """Frobenius-nearest positive semidefinite matrix: clamp negative eigenvalues."""
    M = 0.5 * (M + M.T)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}")
    return (V * np.maximum(w, 0.0)) @ V.T


def _psd_project_batch(Ms):
    Ms = 0.5 * (Ms + Ms.transpose(0, 2, 1))
    if Ms.shape[1] == 2:
        # closed-form symmetric 2x2 spectral clamp, no LAPACK round trip
        a, bb, c = Ms[:, 0, 0], Ms[:, 0, 1], Ms[:, 1, 1]
        mean = 0.5 * (a + c)
        rad = np.sqrt((0.5 * (a - c)) ** 2 + bb**2)
        lo = np.maximum(mean - rad, 0.0)
        hi = np.maximum(mean + rad, 0.0)
        # eigenvector for the larger eigenvalue; (1, 0) when the gap vanishes
        ux = np.where(a - c >= 0.0, rad + 0.5 * (a - c), bb)
        uy = np.where(a - c >= 0.0, bb, rad - 0.5 * (a - c))
        nrm = np.hypot(ux, uy)
        safe = nrm > 0.0
        ux = np.where(safe, ux / np.where(safe, nrm, 1.0), 1.0)
        uy = np.where(safe, uy / np.where(safe, nrm, 1.0), 0.0)
        out = np.empty_like(Ms)
        out[:, 0, 0] = lo + (hi - lo) * ux * ux
        out[:, 1, 1] = lo + (hi - lo) * uy * uy
        out[:, 0, 1] = (hi - lo) * ux * uy
        out[:, 1, 0] = out[:, 0, 1]
        return out
    try:
        w, V = np.linalg.eigh(Ms)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}")
    return np.einsum("iak,ik,ibk->iab", V, np.maximum(w, 0.0), V)


def _max_violation(C, tau):
    if C.shape[0] == 0:
        return float("-inf")
    shifted = C + tau[:, None, None] * np.eye(C.shape[1])
    return float(np.max(np.linalg.eigvalsh(shifted)[:, -1]))


def admm_solve(problem, settings=None):
    """Run the ADMM iteration until the residual tolerances or max_iters.

    Stopping: primal residual max_i ||M_i + C_i(theta) + tau_i I||_F below
    eps_abs + eps_rel * max(||M||, ||C(theta)||), and dual residual
    rho ||sum_i C_i*(M_i - M_i_prev)|| below eps_abs + eps_rel ||2 A^T b||.
    Returns the last iterate flagged non-converged if max_iters is hit.
    """
    s = settings or ADMMSettings()
    A, b, lam = problem.design, problem.targets, problem.lam
    p = A.shape[1]
    m = problem.constraint_ops.shape[0]
    n = problem.constraint_ops.shape[2] if m else 1
    nn = n * n
    P = problem.constraint_ops.reshape(m, p, nn)
    P2 = P.transpose(1, 0, 2).reshape(p, m * nn)      # adjoint as a single GEMV
    tauI = problem.tau[:, None, None] * np.eye(n)
    eye_flat = np.eye(n).ravel()

    AtA2 = 2.0 * (A.T @ A) + 2.0 * lam * np.eye(p)
    c0 = 2.0 * (A.T @ b)
    btb = float(b @ b)
    SPP = np.einsum("ipk,iqk->pq", P, P) if m else np.zeros((p, p))
    G = (P @ eye_flat).T if m else np.zeros((p, 0))   # columns C_i*(I)

    rho = float(s.rho)
    w = float(s.slack_weight)
    soft = w > 0.0 and m > 0

    def factor(r):
        if soft:
            H = np.block([
                [AtA2 + r * SPP, -r * G],
                [-r * G.T, (2.0 * w + r * (n + 1)) * np.eye(m)],
            ])
        else:
            H = AtA2 + r * SPP
        return cho_factor(H)

    fac = factor(rho)
    M = np.zeros((m, n, n))
    U = np.zeros((m, n, n))
    sl = np.zeros(m)          # slack values s_i
    sig = np.zeros(m)         # splitting copy of the slacks
    usl = np.zeros(m)         # scaled duals for sigma = s
    theta = np.zeros(p)
    dual_scale = float(np.linalg.norm(c0))
    al_values = []
    primal = dual = np.inf
    converged = False
    it = 0

    def adjoint(W):
        return P2 @ W.ravel() if m else np.zeros(p)

    for it in range(1, s.max_iters + 1):
        offset = tauI + M + U
        rhs = c0 - rho * adjoint(offset)
        if soft:
            rhs_s = rho * (np.einsum("ik,k->i", offset.reshape(m, nn), eye_flat) + sig + usl)
            sol = cho_solve(fac, np.concatenate([rhs, rhs_s]))
            theta, sl = sol[:p], sol[p:]
        else:
            theta = cho_solve(fac, rhs)
        C = (P2.T @ theta).reshape(m, n, n) if m else np.zeros((0, n, n))
        slI = sl[:, None, None] * np.eye(n) if soft else 0.0
        M_prev = M
        M = _psd_project_batch(slI - C - tauI - U) if m else M
        R = M + C + tauI - slI
        U = U + R
        if soft:
            sig = np.maximum(0.0, sl - usl)
            usl = usl + sig - sl

        primal = float(np.max(np.linalg.norm(R.reshape(m, nn), axis=1))) if m else 0.0
        if soft:
            primal = max(primal, float(np.max(np.abs(sig - sl))))
        dual = rho * float(np.linalg.norm(adjoint(M - M_prev))) if m else 0.0

        # ||A theta - b||^2 + lam ||theta||^2 through the cached normal matrix
        obj = 0.5 * float(theta @ (AtA2 @ theta)) - float(c0 @ theta) + btb + w * float(sl @ sl)
        al = obj + 0.5 * rho * float(
            np.sum((R + U) ** 2) - np.sum(U**2)
            + (np.sum((sig - sl + usl) ** 2) - np.sum(usl**2) if soft else 0.0))
        al_values.append(al)

        if m == 0:
            converged = True
            break
        scale = max(float(np.max(np.linalg.norm(M.reshape(m, nn), axis=1))),
                    float(np.max(np.linalg.norm(C.reshape(m, nn), axis=1))))
        if primal <= s.eps_abs + s.eps_rel * scale and dual <= s.eps_abs + s.eps_rel * dual_scale:
            converged = True
            break

        if s.adapt_rho and it % 10 == 0:
            if primal > 10.0 * dual and rho < 1e6:
                rho *= 2.0
                U /= 2.0
                usl /= 2.0
                fac = factor(rho)
            elif dual > 10.0 * primal and rho > 1e-6:
                rho /= 2.0
                U *= 2.0
                usl *= 2.0
                fac = factor(rho)

    C = (P2.T @ theta).reshape(m, n, n) if m else np.zeros((0, n, n))
    obj = float(np.sum((A @ theta - b) ** 2) + lam * np.sum(theta**2) + w * np.sum(sl**2))
    return SolveReport(
        theta=theta,
        iters=it,
        primal_residual=primal if m else 0.0,
        dual_residual=dual if m else 0.0,
        objective=obj,
        max_constraint_violation=_max_violation(C, problem.tau),
        converged=converged,
        slacks=sl.copy() if soft else None,
        al_values=np.asarray(al_values),
    )
