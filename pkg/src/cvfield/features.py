"""Random Fourier feature maps for the two matrix-valued kernels.

A map of s scalar frequencies approximates the kernel through
Phi(x)^T Phi(y) ~= K(x, y), where Phi(x) is a (feature_dim, n) matrix:

* Gaussian separable:  Phi(x) = phi(x) kron I_n with
  phi_j(x) = sqrt(2/s) cos(w_j^T x + b_j), feature_dim = s * n.
  Coefficients are stored feature-major: component (j, c) of theta
  multiplies phi_j(x) e_c.
* curl-free: row j of Phi(x) is sqrt(2/s) sin(w_j^T x + b_j) w_j^T,
  feature_dim = s.

Frequencies are drawn from N(0, sigma^-2 I) and phases from U[0, 2 pi)
with a counter-based generator, so a (kind, s, n, seed) tuple always
yields the same map.

Equilibria are enforced exactly by the vanishing projector
L = I - Q Q^T, with Q an orthonormal basis of range [Phi(z_1) ... Phi(z_p)].
The projected features Phi^Z(x) = L Phi(x) span fields that are zero at
every z, and L theta is the effective coefficient vector of the raw map.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .kernels import CURL_FREE, GAUSSIAN_SEPARABLE, KernelKind


@dataclass(frozen=True, eq=False)
class FeatureMap:
    kind: KernelKind
    freqs: np.ndarray    # (s, n), units 1/mm
    phases: np.ndarray   # (s,), in [0, 2 pi)

    @property
    def s(self):
        return self.freqs.shape[0]

    @property
    def n(self):
        return self.freqs.shape[1]

    @property
    def feature_dim(self):
        if self.kind.variant == GAUSSIAN_SEPARABLE:
            return self.s * self.n
        return self.s

    @property
    def scale(self):
        return np.sqrt(2.0 / self.s)


@dataclass(frozen=True, eq=False)
class VanishingProjector:
    """Projector L = I - Q Q^T onto the complement of range Phi(Z)."""

    L: np.ndarray        # (feature_dim, feature_dim)
    basis: np.ndarray    # Q, (feature_dim, r)
    Z: np.ndarray        # (p, n), possibly empty


def sample_feature_map(kind, s, n, seed):
    """Draw a deterministic feature map from a counter-based RNG stream."""
    if s < 1:
        raise ValueError("need at least one feature")
    if n < 1:
        raise ValueError("state dimension must be at least 1")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    freqs = rng.normal(0.0, 1.0 / kind.sigma, size=(s, n))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=s)
    return FeatureMap(kind, freqs, phases)


def _angles(fm, X):
    return X @ fm.freqs.T + fm.phases


def eval_features(fm, x):
    """Feature matrix Phi(x), shape (feature_dim, n), at a single point."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != fm.n:
        raise DimensionError(f"x must live in R^{fm.n}")
    a = fm.freqs @ x + fm.phases
    if fm.kind.variant == GAUSSIAN_SEPARABLE:
        # row order must match the flat (s, n) coefficient layout
        return np.kron((fm.scale * np.cos(a))[:, None], np.eye(fm.n))
    return fm.scale * np.sin(a)[:, None] * fm.freqs


def feature_rows(fm, X):
    """Stacked transposed features [Phi(x_1)^T; ...], shape (N n, feature_dim).

    This is the raw design matrix of the regression; right-multiply by a
    projector L to obtain the vanishing variant.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    a = _angles(fm, X)
    if fm.kind.variant == GAUSSIAN_SEPARABLE:
        phi = fm.scale * np.cos(a)                      # (N, s)
        rows = phi[:, None, :, None] * np.eye(fm.n)[None, :, None, :]
        return rows.reshape(N * fm.n, fm.feature_dim)
    rows = fm.scale * np.sin(a)[:, None, :] * fm.freqs.T[None, :, :]
    return rows.reshape(N * fm.n, fm.s)


def field_values(fm, coeffs, X):
    """Fields f(x_t) = Phi(x_t)^T coeffs for a batch of points, (N, n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = _angles(fm, X)
    if fm.kind.variant == GAUSSIAN_SEPARABLE:
        theta = np.asarray(coeffs).reshape(fm.s, fm.n)
        return (fm.scale * np.cos(a)) @ theta
    return fm.scale * (np.sin(a) * coeffs) @ fm.freqs


def eval_feature_jacobians(fm, x, theta):
    """Jacobian of f(x) = Phi(x)^T theta at a single point, (n, n)."""
    return field_jacobians(fm, theta, np.asarray(x, dtype=float)[None, :])[0]


def field_jacobians(fm, coeffs, X):
    """Jacobians of f at a batch of points, shape (N, n, n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = _angles(fm, X)
    if fm.kind.variant == GAUSSIAN_SEPARABLE:
        theta = np.asarray(coeffs).reshape(fm.s, fm.n)
        dphi = -fm.scale * np.sin(a)                    # (N, s)
        return np.einsum("ja,gj,jb->gab", theta, dphi, fm.freqs)
    c = fm.scale * np.cos(a) * coeffs                   # (N, s)
    return np.einsum("gj,ja,jb->gab", c, fm.freqs, fm.freqs)


def build_vanishing_projector(fm, Z):
    """Orthonormal basis of range Phi(Z) and the projector L = I - Q Q^T.

    Requires feature_dim > n |Z|.  If the stacked feature block is
    rank-deficient the achieved range is projected out and a warning is
    issued.
    """
    p = fm.feature_dim
    Z = np.asarray(Z, dtype=float).reshape(-1, fm.n) if np.size(Z) else np.empty((0, fm.n))
    if Z.shape[0] == 0:
        return VanishingProjector(np.eye(p), np.zeros((p, 0)), Z)
    if p <= fm.n * Z.shape[0]:
        raise DimensionError(
            f"need feature_dim > n |Z| ({p} <= {fm.n * Z.shape[0]}) to retain capacity")
    block = np.hstack([eval_features(fm, z) for z in Z])
    U, sv, _ = np.linalg.svd(block, full_matrices=False)
    tol = max(block.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    if rank < fm.n * Z.shape[0]:
        warnings.warn(
            f"feature block at Z is rank deficient ({rank} < {fm.n * Z.shape[0]}); "
            "projecting the achieved range only")
    Q = U[:, :rank]
    L = np.eye(p) - Q @ Q.T
    return VanishingProjector(L, Q, Z)


def symmetrized_jacobian_basis(fm, proj, x):
    """Per-component symmetrized Jacobians of the vanished features.

    Returns E of shape (feature_dim, n, n) with
    E[j] = sym(d/dx of the j-th vanished feature field at x), so the
    symmetrized Jacobian of f = Phi^Z(x)^T theta is sum_j theta_j E[j].
    """
    x = np.asarray(x, dtype=float).ravel()
    a = fm.freqs @ x + fm.phases
    if fm.kind.variant == GAUSSIAN_SEPARABLE:
        dphi = -fm.scale * np.sin(a)[:, None] * fm.freqs        # (s, n)
        Lr = proj.L.reshape(fm.s, fm.n, fm.feature_dim)
        M = np.einsum("kaj,kb->jab", Lr, dphi)
        return 0.5 * (M + M.transpose(0, 2, 1))
    c = fm.scale * np.cos(a)                                     # (s,)
    # raw curl-free Jacobians c_k w_k w_k^T are already symmetric
    return np.einsum("kj,k,ka,kb->jab", proj.L, c, fm.freqs, fm.freqs)


def potential_from_features(fm, proj, theta, x):
    """Scalar potential V with f = -grad V, for the curl-free map.

    With eta = L theta,  V(x) = sqrt(2/s) sum_j eta_j cos(w_j^T x + b_j).
    Accepts a single point or a batch of points.
    """
    if fm.kind.variant != CURL_FREE:
        raise ValueError("potentials are defined for the curl-free map only")
    eta = proj.L @ np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = _angles(fm, np.atleast_2d(x))
    V = fm.scale * (np.cos(a) @ eta)
    return float(V[0]) if single else V
