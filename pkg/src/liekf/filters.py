"""Kalman filters: linear KF, EKF, iterated EKF, and the invariant pair.

The invariant filters operate on a matrix Lie group with left-invariant
measurements ``y = chi @ d + n``. Their error is the concentrated-Gaussian
tangent error ``xi = log(mean^-1 @ chi)``, whose output Jacobian does not
depend on the current estimate. The iterated variant refines the update by
Gauss-Newton on the MAP cost

    0.5 * xi^T P^-1 xi + 0.5 * |z - exp(xi) d + d|^2_{N_hat},

while the covariance (Riccati) update uses the iteration-independent
Jacobian, so it never depends on how many iterations ran.

Equivalences baked into the implementation: the plain invariant update is
the iterated one with a single iteration, and the EKF is the iterated EKF
with a single iteration (same arithmetic path in both cases).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from .belief import (
    DEFAULT_DELTA,
    GroupBelief,
    VectorBelief,
    factor,
    noise_free_gain,
    regularized_gain,
    riccati_update,
    standard_gain,
    symmetrize,
)
from .errors import NonFiniteError
from .groups import GroupElement, MatrixLieGroup


class GainMode(Enum):
    STANDARD = "standard"
    NOISE_FREE = "noise_free"
    REGULARIZED = "regularized"


@dataclass
class GNConfig:
    """Gauss-Newton loop settings.

    ``tol`` bounds the iterate step norm, ``n_max`` caps the iteration
    count, ``delta`` is the ridge used by the regularized gain.
    """

    tol: float = 1e-7
    n_max: int = 50
    gain_mode: GainMode = GainMode.STANDARD
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")


@dataclass
class UpdateReport:
    """Diagnostics from a measurement update.

    ``iterates`` records the accepted Gauss-Newton iterates (tangent
    coordinates for the invariant filters, local state coordinates
    otherwise); a single-shot update stores its one correction.
    """

    iterations: int
    converged: bool
    step_norm: float
    innovation: np.ndarray
    iterates: list = field(default_factory=list)


@dataclass
class LinearModel:
    F: np.ndarray
    B: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    N: np.ndarray


@dataclass
class NonlinearModel:
    """Nonlinear vector-state model with Jacobian callbacks.

    ``f(x, u, w)`` is the transition, ``h(x)`` the output. ``F_jac`` and
    ``G_jac`` are the transition Jacobians w.r.t. state and noise at
    ``(x, u, 0)``; ``H_jac`` is the output Jacobian at ``x``. Models used
    only for updates may leave the dynamics side unset (and vice versa).
    """

    h: Callable[[np.ndarray], np.ndarray] | None = None
    H_jac: Callable[[np.ndarray], np.ndarray] | None = None
    N: np.ndarray | None = None
    f: Callable[[np.ndarray, Any, np.ndarray], np.ndarray] | None = None
    F_jac: Callable[[np.ndarray, Any], np.ndarray] | None = None
    G_jac: Callable[[np.ndarray, Any], np.ndarray] | None = None
    Q: np.ndarray | None = None


@dataclass
class InvariantModel:
    """Group-valued dynamics with tangent-space Jacobian callbacks.

    ``f(chi, u)`` propagates the mean; ``F_jac``/``G_jac`` give the
    tangent-error transition Jacobians at ``(chi, u)``. ``d_fn`` optionally
    supplies the per-step measurement direction vector d_k.
    """

    f: Callable[[GroupElement, Any], GroupElement]
    F_jac: Callable[[GroupElement, Any], np.ndarray]
    G_jac: Callable[[GroupElement, Any], np.ndarray]
    Q: np.ndarray
    N: np.ndarray | None = None
    d_fn: Callable[[int], np.ndarray] | None = None


def _gain(P, H, mode: GainMode, N_hat, delta, L):
    if mode is GainMode.STANDARD:
        return standard_gain(P, H, N_hat)
    if mode is GainMode.NOISE_FREE:
        HL = H @ L
        rcond = max(HL.shape) * np.finfo(float).eps if HL.size else 0.0
        return L @ np.linalg.pinv(HL, rcond=rcond)
    return regularized_gain(P, H, delta)


# ---------------------------------------------------------------------------
# Linear Kalman filter
# ---------------------------------------------------------------------------


def kf_predict(belief: VectorBelief, model: LinearModel, u) -> VectorBelief:
    """Propagate: mean = F x + B u, P = F P F^T + Q."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    mean = model.F @ belief.mean + model.B @ u
    cov = model.F @ belief.cov @ model.F.T + model.Q
    return VectorBelief(mean, cov)


def kf_update(
    belief: VectorBelief,
    H: np.ndarray,
    y: np.ndarray,
    N: np.ndarray | None = None,
    gain_mode: GainMode = GainMode.STANDARD,
    delta: float = DEFAULT_DELTA,
) -> tuple[VectorBelief, UpdateReport]:
    """Measurement update of a linear Kalman filter.

    With ``GainMode.NOISE_FREE`` the update treats ``y = H x`` as exact:
    afterwards ``H mean = y`` and ``H P H^T = 0``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = y - H @ belief.mean
    L = factor(belief.cov).L if gain_mode is GainMode.NOISE_FREE else None
    K = _gain(belief.cov, H, gain_mode, N, delta, L)
    step = K @ z
    mean = belief.mean + step
    cov = riccati_update(belief.cov, K, H)
    report = UpdateReport(
        iterations=1,
        converged=True,
        step_norm=float(np.linalg.norm(step)),
        innovation=z,
        iterates=[step],
    )
    return VectorBelief(mean, cov), report


# ---------------------------------------------------------------------------
# EKF / iterated EKF (vector state)
# ---------------------------------------------------------------------------


def ekf_predict(belief: VectorBelief, model: NonlinearModel, u) -> VectorBelief:
    """Propagate through f with zero noise; P = F P F^T + G Q G^T."""
    w0 = np.zeros(model.Q.shape[0])
    mean = np.asarray(model.f(belief.mean, u, w0), dtype=float)
    F = np.asarray(model.F_jac(belief.mean, u), dtype=float)
    G = np.asarray(model.G_jac(belief.mean, u), dtype=float)
    cov = F @ belief.cov @ F.T + G @ model.Q @ G.T
    return VectorBelief(mean, cov)


def iterekf_update(
    belief: VectorBelief,
    model: NonlinearModel,
    y: np.ndarray,
    cfg: GNConfig | None = None,
) -> tuple[VectorBelief, UpdateReport]:
    """Gauss-Newton (iterated EKF) measurement update.

    Iterates ``x^{i+1} = mean + K^i (y - h(x^i) - H^i (mean - x^i))`` with
    the output Jacobian re-evaluated at each iterate. The covariance uses
    the final iterate's linearization; with ``n_max=1`` this is exactly the
    EKF update.
    """
    cfg = cfg or GNConfig()
    y = np.atleast_1d(np.asarray(y, dtype=float))
    P = belief.cov
    mean = belief.mean
    L = factor(P).L if cfg.gain_mode is GainMode.NOISE_FREE else None

    x_i = mean.copy()
    z0 = y - np.atleast_1d(np.asarray(model.h(mean), dtype=float))
    step = np.inf
    i = 0
    iterates: list[np.ndarray] = []
    H_i = K_i = None
    while step > cfg.tol and i < cfg.n_max:
        H_i = np.atleast_2d(np.asarray(model.H_jac(x_i), dtype=float))
        K_i = _gain(P, H_i, cfg.gain_mode, model.N, cfg.delta, L)
        resid = y - np.atleast_1d(np.asarray(model.h(x_i), dtype=float))
        x_next = mean + K_i @ (resid - H_i @ (mean - x_i))
        if not np.all(np.isfinite(x_next)):
            raise NonFiniteError("iterated EKF produced a non-finite iterate")
        step = float(np.linalg.norm(x_next - x_i))
        x_i = x_next
        iterates.append(x_i.copy())
        i += 1

    cov = riccati_update(P, K_i, H_i)
    report = UpdateReport(
        iterations=i,
        converged=step <= cfg.tol,
        step_norm=step,
        innovation=z0,
        iterates=iterates,
    )
    return VectorBelief(x_i, cov), report


def ekf_update(
    belief: VectorBelief,
    model: NonlinearModel,
    y: np.ndarray,
    gain_mode: GainMode = GainMode.STANDARD,
    delta: float = DEFAULT_DELTA,
) -> tuple[VectorBelief, UpdateReport]:
    """Single-linearization EKF update (one Gauss-Newton iteration)."""
    cfg = GNConfig(n_max=1, gain_mode=gain_mode, delta=delta)
    return iterekf_update(belief, model, y, cfg)


# ---------------------------------------------------------------------------
# Invariant EKF / iterated invariant EKF (group state)
# ---------------------------------------------------------------------------


def iekf_predict(belief: GroupBelief, model: InvariantModel, u) -> GroupBelief:
    """Propagate a concentrated Gaussian: mean through f, P = F P F^T + G Q G^T."""
    mean = model.f(belief.mean, u)
    F = np.asarray(model.F_jac(belief.mean, u), dtype=float)
    G = np.asarray(model.G_jac(belief.mean, u), dtype=float)
    cov = F @ belief.cov @ F.T + G @ model.Q @ G.T
    return GroupBelief(mean, cov)


def invariant_output_jacobian(
    group: MatrixLieGroup, d: np.ndarray, informative_only: bool = True
) -> np.ndarray:
    """Output Jacobian of ``chi -> chi @ d`` in invariant coordinates.

    Defined by ``exp(xi) @ d = d + H xi + O(|xi|^2)``; column j is
    ``hat(e_j) @ d``. It does not depend on the current estimate. With
    ``informative_only`` the structurally zero ambient rows are dropped.
    """
    d = np.asarray(d, dtype=float)
    H = np.tensordot(group.basis(), d, axes=([2], [0])).T
    if informative_only:
        H = H[group.informative_rows]
    return H


def _invariant_setup(belief: GroupBelief, d, y):
    group = belief.group
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float)
    rows = group.informative_rows
    chi_inv = belief.mean.inverse()
    z = (chi_inv.act(y) - d)[rows]
    H = invariant_output_jacobian(group, d)
    return group, d, rows, chi_inv, z, H


def iiekf_update(
    belief: GroupBelief,
    d: np.ndarray,
    y: np.ndarray,
    N: np.ndarray | None = None,
    cfg: GNConfig | None = None,
) -> tuple[GroupBelief, UpdateReport]:
    """Iterated invariant EKF update for a measurement ``y = chi d + n``.

    Runs Gauss-Newton on the tangent-space MAP problem:

        H^i = exp(xi^i) H J_r(xi^i)
        z^i = z - exp(xi^i) d + d + H^i xi^i
        xi^{i+1} = K^i z^i

    until the step norm falls below ``cfg.tol``. The mean becomes
    ``mean @ exp(xi)``; the covariance update uses the iterate-independent
    H and the first gain, so it is unaffected by the iteration count.

    The measurement noise covariance ``N`` applies to the informative
    ambient rows and is mapped into invariant coordinates with the
    corresponding block of ``mean^-1``. It is ignored by the noise-free
    and regularized gain modes.
    """
    cfg = cfg or GNConfig()
    group, d, rows, chi_inv, z, H = _invariant_setup(belief, d, y)
    P = belief.cov

    N_hat = None
    if cfg.gain_mode is GainMode.STANDARD:
        if N is None:
            raise ValueError("standard gain requires a measurement covariance N")
        A = chi_inv.matrix[np.ix_(rows, rows)]
        N_hat = A @ np.atleast_2d(np.asarray(N, dtype=float)) @ A.T
    L = factor(P).L if cfg.gain_mode is GainMode.NOISE_FREE else None

    n = group.dim
    xi = np.zeros(n)
    step = np.inf
    i = 0
    iterates: list[np.ndarray] = []
    while step > cfg.tol and i < cfg.n_max:
        E = group.exp(xi)
        H_i = E.matrix[np.ix_(rows, rows)] @ H @ group.right_jacobian(xi)
        K_i = _gain(P, H_i, cfg.gain_mode, N_hat, cfg.delta, L)
        z_i = z - E.act(d)[rows] + d[rows] + H_i @ xi
        xi_next = K_i @ z_i
        if not np.all(np.isfinite(xi_next)):
            raise NonFiniteError("iterated invariant EKF produced a non-finite iterate")
        step = float(np.linalg.norm(xi_next - xi))
        xi = xi_next
        iterates.append(xi.copy())
        i += 1

    mean = belief.mean.compose(group.exp(xi))
    K = _gain(P, H, cfg.gain_mode, N_hat, cfg.delta, L)
    cov = riccati_update(P, K, H)
    report = UpdateReport(
        iterations=i,
        converged=step <= cfg.tol,
        step_norm=step,
        innovation=z,
        iterates=iterates,
    )
    return GroupBelief(mean, cov), report


def iekf_update(
    belief: GroupBelief,
    d: np.ndarray,
    y: np.ndarray,
    N: np.ndarray | None = None,
    gain_mode: GainMode = GainMode.STANDARD,
    delta: float = DEFAULT_DELTA,
) -> tuple[GroupBelief, UpdateReport]:
    """Invariant EKF update (a single Gauss-Newton iteration)."""
    cfg = GNConfig(n_max=1, gain_mode=gain_mode, delta=delta)
    return iiekf_update(belief, d, y, N, cfg)


def iiekf_update_noise_free(
    belief: GroupBelief,
    d: np.ndarray,
    y: np.ndarray,
    cfg: GNConfig | None = None,
) -> tuple[GroupBelief, UpdateReport]:
    """Iterated invariant update in the exact noise-free measurement limit.

    Same iteration as :func:`iiekf_update` with every gain replaced by
    ``K = L (H L)^+`` where ``P = L L^T``. After convergence the belief is
    compatible with the measurement: the mean satisfies ``chi d = y`` and
    the covariance is null along the measured directions.
    """
    base = cfg or GNConfig()
    nf_cfg = GNConfig(tol=base.tol, n_max=base.n_max, gain_mode=GainMode.NOISE_FREE)
    return iiekf_update(belief, d, y, None, nf_cfg)


def check_compatibility(
    belief: GroupBelief, d: np.ndarray, y: np.ndarray
) -> tuple[float, float]:
    """Measure how compatible a belief is with a noise-free measurement.

    Returns ``(|mean @ d - y|, |H P H^T|_F)``; both are ~0 for a belief
    that hard-encodes the measurement.
    """
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float)
    residual = float(np.linalg.norm(belief.mean.act(d) - y))
    H = invariant_output_jacobian(belief.group, d)
    projected = float(np.linalg.norm(H @ belief.cov @ H.T))
    return residual, projected
