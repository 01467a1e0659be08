"""Gaussian beliefs, covariance factorization, and Kalman gains.

Three gains are provided:

- ``standard_gain``: K = P H^T (H P H^T + N)^-1, the usual Kalman gain.
- ``noise_free_gain``: K = L (H L)^+ with P = L L^T, the zero-noise limit
  of the Kalman gain. Always defined, even when H P H^T is singular.
- ``regularized_gain``: K = P H^T (H P H^T + delta I)^-1, the practical
  substitute for the noise-free gain when exact pseudo-inversion is too
  brittle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPSDError, SingularInnovationError
from .groups import GroupElement

# Eigenvalues below -PSD_TOL fail the PSD check; eigenvalues below
# RANK_TOL * lambda_max are truncated to zero by the factorization.
PSD_TOL = 1e-10
RANK_TOL = 1e-12

# Innovation covariances with condition number above this are treated as
# singular by the standard gain.
COND_LIMIT = 1e12

# Default regularization, the value used by the noise-free benchmark
# scenario.
DEFAULT_DELTA = 1e-5


def symmetrize(P: np.ndarray) -> np.ndarray:
    """(P + P^T) / 2, applied after every covariance update to kill drift."""
    return 0.5 * (P + P.T)


@dataclass
class VectorBelief:
    """Gaussian belief (mean, covariance) on a vector space."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = symmetrize(np.asarray(self.cov, dtype=float))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class GroupBelief:
    """Concentrated Gaussian on a matrix Lie group.

    The state is distributed as ``mean @ exp(xi)`` with ``xi ~ N(0, cov)``
    in tangent coordinates.
    """

    mean: GroupElement
    cov: np.ndarray

    def __post_init__(self):
        self.cov = symmetrize(np.asarray(self.cov, dtype=float))

    @property
    def group(self):
        return self.mean.group


@dataclass
class CovFactor:
    """Rank-revealing factor L with P = L L^T; columns of L span im(P)."""

    L: np.ndarray
    rank: int


def factor(P: np.ndarray) -> CovFactor:
    """Factor a PSD matrix as P = L L^T, truncating negligible eigenvalues.

    Uses a symmetric eigendecomposition rather than Cholesky because the
    covariance becomes exactly singular after noise-free updates.

    Raises
    ------
    NotPSDError
        If an eigenvalue falls below ``-PSD_TOL``.
    """
    P = symmetrize(np.asarray(P, dtype=float))
    w, V = np.linalg.eigh(P)
    if w[0] < -PSD_TOL:
        raise NotPSDError(f"matrix has eigenvalue {w[0]!r} < -{PSD_TOL}")
    w = np.maximum(w, 0.0)
    cutoff = RANK_TOL * w[-1] if w[-1] > 0.0 else 0.0
    keep = w > cutoff
    L = V[:, keep] * np.sqrt(w[keep])
    return CovFactor(L=L, rank=int(keep.sum()))


def standard_gain(P: np.ndarray, H: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Kalman gain K = P H^T (H P H^T + N)^-1.

    Raises
    ------
    SingularInnovationError
        If the innovation covariance has condition number above
        ``COND_LIMIT``; callers should fall back to the noise-free or
        regularized gain.
    """
    P = np.asarray(P, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    S = symmetrize(H @ P @ H.T + N)
    # S is symmetric, so its singular values are |eigenvalues|.
    w = np.abs(np.linalg.eigvalsh(S))
    if w.max() == 0.0 or w.min() == 0.0 or w.max() / w.min() > COND_LIMIT:
        raise SingularInnovationError(
            "innovation covariance is numerically singular"
        )
    # K = P H^T S^-1, via a solve so im(K) stays inside im(P) exactly.
    return P @ np.linalg.solve(S, H).T


def noise_free_gain(P: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Zero-noise limit gain K = L (H L)^+ with P = L L^T.

    Always defined. The pseudo-inverse cutoff is
    ``max(dims) * machine_eps * sigma_max``; sloppier thresholds can end up
    inverting noise-level singular values and destabilize the filter.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    L = factor(P).L
    HL = H @ L
    rcond = max(HL.shape) * np.finfo(float).eps if HL.size else 0.0
    return L @ np.linalg.pinv(HL, rcond=rcond)


def regularized_gain(
    P: np.ndarray, H: np.ndarray, delta: float = DEFAULT_DELTA
) -> np.ndarray:
    """Regularized gain K = P H^T (H P H^T + delta I)^-1, delta > 0."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    P = np.asarray(P, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    S = symmetrize(H @ P @ H.T) + delta * np.eye(H.shape[0])
    return P @ np.linalg.solve(S, H).T


def riccati_update(P: np.ndarray, K: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Covariance update P+ = (I - K H) P, symmetrized."""
    P = np.asarray(P, dtype=float)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = P.shape[0]
    return symmetrize((np.eye(n) - K @ H) @ P)
