"""Estimation error metrics and Monte Carlo consistency statistics.

The average normalized estimation error squared (ANEES) over N_s
simulations is

    (1/N_s) * sum_n  e_n^T P_n^-1 e_n,

which for a consistent filter concentrates around the error-space
dimension; ``N_s * anees`` follows a chi-square law with
``N_s * n_dof`` degrees of freedom, which gives the 95% confidence
interval used to flag over- and under-confident filters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special

from .errors import SingularCovarianceError
from .groups import GroupElement, so3_log

# Ridge added to a covariance that fails to invert (exactly singular after
# noise-free updates).
ANEES_RIDGE = 1e-12

# Relative tolerance of the chi-square inverse-CDF root find.
CHI2_INV_RTOL = 1e-10


def invariant_error(est: GroupElement, truth: GroupElement) -> np.ndarray:
    """Left-invariant tangent error log(est^-1 @ truth)."""
    if truth.group is not est.group:
        raise ValueError("estimate and truth must live on the same group")
    return est.group.log(est.inverse().compose(truth))


def ekf_error(est, truth) -> np.ndarray:
    """Mixed pose error (log(R_est^T R), v - v_est, p - p_est).

    Accepts any pair of objects with R/v/p attributes (extended poses).
    """
    return np.concatenate(
        (
            so3_log(est.R.T @ truth.R),
            truth.v - est.v,
            truth.p - est.p,
        )
    )


def anees(errors: np.ndarray, covs: np.ndarray) -> float:
    """Average normalized estimation error squared with per-sim covariance.

    Parameters
    ----------
    errors:
        Array (n_sims, n) of per-simulation errors.
    covs:
        Array (n_sims, n, n) of the matching covariances.

    Raises
    ------
    SingularCovarianceError
        If a covariance cannot be inverted even after adding a ridge of
        ``ANEES_RIDGE * I``.
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    covs = np.asarray(covs, dtype=float)
    total = 0.0
    eye = np.eye(errors.shape[1])
    for e, P in zip(errors, covs):
        try:
            x = np.linalg.solve(P, e)
        except np.linalg.LinAlgError:
            try:
                x = np.linalg.solve(P + ANEES_RIDGE * eye, e)
            except np.linalg.LinAlgError as exc:
                raise SingularCovarianceError(
                    "covariance not invertible even after regularization"
                ) from exc
        total += float(e @ x)
    return total / errors.shape[0]


def anees_projected(errors: np.ndarray, covs: np.ndarray) -> tuple[float, float]:
    """ANEES restricted to the span of each (possibly singular) covariance.

    The quadratic form uses the Moore-Penrose pseudo-inverse, so exactly
    removed directions contribute nothing. Returns the statistic and the
    mean numerical rank, which is the matching degrees-of-freedom count.
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    covs = np.asarray(covs, dtype=float)
    total = 0.0
    ranks = 0
    for e, P in zip(errors, covs):
        Pinv = np.linalg.pinv(P, rcond=1e-12, hermitian=True)
        total += float(e @ Pinv @ e)
        ranks += int(np.linalg.matrix_rank(P, rtol=1e-12, hermitian=True))
    n = errors.shape[0]
    return total / n, ranks / n


@dataclass
class AneesInterval:
    """95% confidence interval [r1, r2] for the ANEES statistic."""

    r1: float
    r2: float
    n_sims: int
    n_dof: int


def _chi2_ppf(q: float, k: float) -> float:
    """Chi-square quantile by bracketed root-find on the regularized
    incomplete gamma function."""
    lo, hi = 0.0, k + 20.0 * np.sqrt(2.0 * k) + 100.0
    while scipy.special.gammainc(k / 2.0, hi / 2.0) < q:
        hi *= 2.0
    return float(
        scipy.optimize.brentq(
            lambda x: scipy.special.gammainc(k / 2.0, x / 2.0) - q,
            lo,
            hi,
            rtol=CHI2_INV_RTOL,
        )
    )


def chi2_interval(n_sims: int, n_dof: int) -> AneesInterval:
    """95% interval for the ANEES of a consistent filter.

    ``n_sims * anees`` is chi-square with ``n_sims * n_dof`` degrees of
    freedom, so the bounds are the 2.5%/97.5% quantiles scaled by
    ``1/n_sims``.
    """
    if n_sims < 1 or n_dof < 1:
        raise ValueError("n_sims and n_dof must be positive integers")
    k = n_sims * n_dof
    r1 = _chi2_ppf(0.025, k) / n_sims
    r2 = _chi2_ppf(0.975, k) / n_sims
    return AneesInterval(r1=r1, r2=r2, n_sims=n_sims, n_dof=n_dof)
