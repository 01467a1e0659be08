"""Matrix Lie group machinery: SO(3), SE(3), SE_2(3) and a generic fallback.

Conventions
-----------
- Group elements are stored as N x N real matrices wrapped in
  :class:`GroupElement`, composition is matrix multiplication.
- Tangent vectors are plain 1-D numpy arrays of length ``group.dim``,
  identified with the Lie algebra through ``hat``/``vee``.
- SE(3) tangents are ordered (rotation, translation); SE_2(3) tangents are
  ordered (rotation, velocity, position).
- ``exp``/``log`` use the principal branch only. Rotation angles within
  ``ANGLE_NEAR_PI_TOL`` of pi raise :class:`~liekf.errors.AngleNearPiError`.
- The right Jacobian J_r satisfies
  ``exp(xi + delta) = exp(xi) @ exp(J_r(xi) @ delta) + O(|delta|^2)``,
  and the left Jacobian is ``J_l(xi) = J_r(-xi)``.

Closed forms for SO(3)/SE(3)/SE_2(3) follow Barfoot, "State Estimation for
Robotics". :class:`GenericMatrixGroup` provides series/decomposition-based
implementations used to cross-validate the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    AngleNearPiError,
    DimensionError,
    InvalidGroupElementError,
    NotInAlgebraError,
)

# Small-angle switchover: below this rotation norm the trigonometric
# coefficients are replaced by 4th-order Taylor expansions to avoid
# catastrophic cancellation.
SMALL_ANGLE_TOL = 1e-4

# Principal-branch guard for rotation logarithms.
ANGLE_NEAR_PI_TOL = 1e-6

# Tolerance for algebra membership and group invariant checks.
MEMBERSHIP_TOL = 1e-9

# Generic right-Jacobian series: truncate once a term falls below this
# norm, hard cap on the number of terms.
SERIES_TERM_TOL = 1e-14
SERIES_MAX_TERMS = 30


def skew(v: np.ndarray) -> np.ndarray:
    """3x3 skew-symmetric matrix such that ``skew(v) @ w == cross(v, w)``."""
    vx, vy, vz = v
    return np.array([[0.0, -vz, vy], [vz, 0.0, -vx], [-vy, vx, 0.0]])


def _so3_coeffs(theta: float) -> tuple[float, float]:
    """Rodrigues coefficients (sin t / t, (1 - cos t) / t^2)."""
    if theta < SMALL_ANGLE_TOL:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    return a, b


def _so3_jac_coeff(theta: float) -> float:
    """Third Jacobian coefficient (t - sin t) / t^3."""
    if theta < SMALL_ANGLE_TOL:
        t2 = theta * theta
        return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    return (theta - math.sin(theta)) / theta**3


def so3_exp(xi: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a 3-vector rotation."""
    theta = math.sqrt(float(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]))
    a, b = _so3_coeffs(theta)
    k = skew(xi)
    return np.eye(3) + a * k + b * (k @ k)


def so3_log(R: np.ndarray) -> np.ndarray:
    """Principal-branch rotation logarithm.

    Raises
    ------
    AngleNearPiError
        If the rotation angle is within ``ANGLE_NEAR_PI_TOL`` of pi.
    """
    c = (np.trace(R) - 1.0) / 2.0
    theta = math.acos(min(1.0, max(-1.0, c)))
    if math.pi - theta < ANGLE_NEAR_PI_TOL:
        raise AngleNearPiError(
            f"rotation angle {theta!r} is within {ANGLE_NEAR_PI_TOL} of pi"
        )
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < SMALL_ANGLE_TOL:
        t2 = theta * theta
        scale = 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0)
    else:
        scale = theta / (2.0 * math.sin(theta))
    return scale * w


def so3_right_jacobian(xi: np.ndarray) -> np.ndarray:
    theta = math.sqrt(float(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]))
    _, b = _so3_coeffs(theta)
    c = _so3_jac_coeff(theta)
    k = skew(xi)
    return np.eye(3) - b * k + c * (k @ k)


def so3_left_jacobian(xi: np.ndarray) -> np.ndarray:
    return so3_right_jacobian(-np.asarray(xi, dtype=float))


def so3_left_jacobian_inv(xi: np.ndarray) -> np.ndarray:
    """Closed-form inverse of the SO(3) left Jacobian."""
    theta = math.sqrt(float(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]))
    if theta < SMALL_ANGLE_TOL:
        t2 = theta * theta
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        d = 1.0 / (theta * theta) - (1.0 + math.cos(theta)) / (
            2.0 * theta * math.sin(theta)
        )
    k = skew(xi)
    return np.eye(3) - 0.5 * k + d * (k @ k)


def _se3_q_matrix(rho: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Coupling block of the SE(3)/SE_2(3) left Jacobian (Barfoot 7.86)."""
    theta = float(np.linalg.norm(phi))
    rx = skew(rho)
    px = skew(phi)
    t2 = theta * theta
    if theta < SMALL_ANGLE_TOL:
        c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
        c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0
        c3 = 1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0
    else:
        t3 = t2 * theta
        t4 = t2 * t2
        t5 = t4 * theta
        m = 1.0 - t2 / 2.0 - math.cos(theta)
        c1 = (theta - math.sin(theta)) / t3
        c2 = -m / t4
        c3 = -0.5 * (m / t4 - 3.0 * (theta - math.sin(theta) - t3 / 6.0) / t5)
    q = (
        0.5 * rx
        + c1 * (px @ rx + rx @ px + px @ rx @ px)
        + c2 * (px @ px @ rx + rx @ px @ px - 3.0 * px @ rx @ px)
        + c3 * (px @ rx @ px @ px + px @ px @ rx @ px)
    )
    return q


@dataclass(frozen=True)
class GroupElement:
    """An element of a matrix Lie group: the group tag plus an N x N matrix."""

    group: "MatrixLieGroup"
    matrix: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise InvalidGroupElementError("group element matrix is not finite")

    def compose(self, other: "GroupElement") -> "GroupElement":
        if other.group is not self.group:
            raise DimensionError("cannot compose elements of different groups")
        return GroupElement(self.group, self.group._compose(self.matrix, other.matrix))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return self.compose(other)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.group, self.group._inverse(self.matrix))

    def act(self, d: np.ndarray) -> np.ndarray:
        """Group action on an ambient vector: ``matrix @ d``."""
        d = np.asarray(d, dtype=float)
        if d.shape != (self.group.mat_dim,):
            raise DimensionError(
                f"expected vector of length {self.group.mat_dim}, got {d.shape}"
            )
        return self.matrix @ d

    def log(self) -> np.ndarray:
        return self.group.log(self)


class MatrixLieGroup:
    """Base class for matrix Lie groups.

    Subclasses provide closed-form ``hat``/``exp``/``log``/``right_jacobian``;
    the base class supplies shared plumbing (vee via hat round-trip check,
    identity, validation hooks, mirrored left Jacobian).
    """

    name: str = "generic"
    dim: int = 0
    mat_dim: int = 0

    # -- algebra ---------------------------------------------------------

    def basis(self) -> np.ndarray:
        """Generators E_j = hat(e_j), shape (dim, N, N). Read-only."""
        cached = getattr(self, "_basis_cache", None)
        if cached is None:
            out = np.zeros((self.dim, self.mat_dim, self.mat_dim))
            for j in range(self.dim):
                e = np.zeros(self.dim)
                e[j] = 1.0
                out[j] = self.hat(e)
            out.flags.writeable = False
            self._basis_cache = cached = out
        return cached

    def hat(self, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _vee_raw(self, M: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vee(self, M: np.ndarray) -> np.ndarray:
        """Inverse of ``hat``. ``M`` must lie in the algebra to 1e-9."""
        M = np.asarray(M, dtype=float)
        if M.shape != (self.mat_dim, self.mat_dim):
            raise DimensionError(
                f"expected {self.mat_dim}x{self.mat_dim} matrix, got {M.shape}"
            )
        xi = self._vee_raw(M)
        scale = 1.0 + np.abs(M).max()
        if np.abs(self.hat(xi) - M).max() > MEMBERSHIP_TOL * scale:
            raise NotInAlgebraError("matrix is not in the Lie algebra")
        return xi

    def _check_xi(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim,):
            raise DimensionError(f"expected tangent of length {self.dim}, got {xi.shape}")
        return xi

    def adjoint_algebra(self, xi: np.ndarray) -> np.ndarray:
        """ad_xi as a dim x dim matrix: ad_xi @ zeta = vee([hat(xi), hat(zeta)])."""
        xi = self._check_xi(xi)
        x = self.hat(xi)
        basis = self.basis()
        cols = [self._vee_raw(x @ e - e @ x) for e in basis]
        return np.column_stack(cols)

    # -- group -----------------------------------------------------------

    def identity(self) -> GroupElement:
        return GroupElement(self, np.eye(self.mat_dim))

    def exp(self, xi: np.ndarray) -> GroupElement:
        raise NotImplementedError

    def log(self, g: GroupElement) -> np.ndarray:
        raise NotImplementedError

    def _compose(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a @ b

    def _inverse(self, a: np.ndarray) -> np.ndarray:
        return np.linalg.inv(a)

    def from_matrix(self, M: np.ndarray) -> GroupElement:
        """Wrap a matrix after validating the group membership invariants."""
        M = np.asarray(M, dtype=float)
        if M.shape != (self.mat_dim, self.mat_dim):
            raise DimensionError(
                f"expected {self.mat_dim}x{self.mat_dim} matrix, got {M.shape}"
            )
        if not np.all(np.isfinite(M)):
            raise InvalidGroupElementError("group element matrix is not finite")
        self._validate(M)
        return GroupElement(self, M)

    def _validate(self, M: np.ndarray) -> None:
        if abs(np.linalg.det(M)) < 1e-12:
            raise InvalidGroupElementError("matrix is not invertible")

    # -- Jacobians ---------------------------------------------------------

    def right_jacobian(self, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def left_jacobian(self, xi: np.ndarray) -> np.ndarray:
        xi = self._check_xi(xi)
        return self.right_jacobian(-xi)

    def right_jacobian_series(self, xi: np.ndarray) -> np.ndarray:
        """Series evaluation J_r(xi) = sum_k (-ad_xi)^k / (k+1)!.

        Converges for all xi; used as the generic fallback and as the
        cross-validation oracle for the closed forms.
        """
        xi = self._check_xi(xi)
        a = -self.adjoint_algebra(xi)
        term = np.eye(self.dim)
        total = np.eye(self.dim)
        for k in range(1, SERIES_MAX_TERMS + 1):
            term = term @ a / (k + 1.0)
            total = total + term
            if np.abs(term).max() < SERIES_TERM_TOL:
                break
        return total

    # -- measurement plumbing ---------------------------------------------

    @property
    def informative_rows(self) -> np.ndarray:
        """Ambient rows that can carry first-order information.

        Rows that are identically zero in every algebra generator contribute
        nothing to ``exp(xi) @ d - d`` at first order and are dropped from
        innovations before gain computation.
        """
        cached = getattr(self, "_rows_cache", None)
        if cached is None:
            rows = np.any(self.basis() != 0.0, axis=(0, 2))
            cached = np.flatnonzero(rows)
            cached.flags.writeable = False
            self._rows_cache = cached
        return cached


def _validate_rotation(R: np.ndarray, tol: float = MEMBERSHIP_TOL) -> None:
    if np.abs(R.T @ R - np.eye(3)).max() > tol:
        raise InvalidGroupElementError("rotation block is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise InvalidGroupElementError("rotation block has det != 1")


class SO3Group(MatrixLieGroup):
    """Rotation group, 3x3 matrices, tangent = rotation vector."""

    name = "so3"
    dim = 3
    mat_dim = 3

    def hat(self, xi):
        return skew(self._check_xi(xi))

    def _vee_raw(self, M):
        return np.array([M[2, 1], M[0, 2], M[1, 0]])

    def exp(self, xi):
        return GroupElement(self, so3_exp(self._check_xi(xi)))

    def log(self, g):
        return so3_log(g.matrix)

    def _inverse(self, a):
        return a.T.copy()

    def _validate(self, M):
        _validate_rotation(M)

    def right_jacobian(self, xi):
        return so3_right_jacobian(self._check_xi(xi))


class SE3Group(MatrixLieGroup):
    """Rigid transforms, 4x4 matrices, tangent = (rotation, translation)."""

    name = "se3"
    dim = 6
    mat_dim = 4

    def hat(self, xi):
        xi = self._check_xi(xi)
        M = np.zeros((4, 4))
        M[:3, :3] = skew(xi[:3])
        M[:3, 3] = xi[3:]
        return M

    def _vee_raw(self, M):
        return np.concatenate(([M[2, 1], M[0, 2], M[1, 0]], M[:3, 3]))

    def exp(self, xi):
        xi = self._check_xi(xi)
        phi, rho = xi[:3], xi[3:]
        M = np.eye(4)
        M[:3, :3] = so3_exp(phi)
        M[:3, 3] = so3_left_jacobian(phi) @ rho
        return GroupElement(self, M)

    def log(self, g):
        M = g.matrix
        phi = so3_log(M[:3, :3])
        rho = so3_left_jacobian_inv(phi) @ M[:3, 3]
        return np.concatenate((phi, rho))

    def _compose(self, a, b):
        out = np.eye(4)
        out[:3, :3] = a[:3, :3] @ b[:3, :3]
        out[:3, 3] = a[:3, :3] @ b[:3, 3] + a[:3, 3]
        return out

    def _inverse(self, a):
        out = np.eye(4)
        Rt = a[:3, :3].T
        out[:3, :3] = Rt
        out[:3, 3] = -Rt @ a[:3, 3]
        return out

    def _validate(self, M):
        _validate_rotation(M[:3, :3])
        expected = np.array([[0.0, 0.0, 0.0, 1.0]])
        if np.abs(M[3:] - expected).max() > MEMBERSHIP_TOL:
            raise InvalidGroupElementError("bottom row must be (0, 0, 0, 1)")

    def right_jacobian(self, xi):
        xi = self._check_xi(xi)
        phi, rho = -xi[:3], -xi[3:]
        J = np.zeros((6, 6))
        jl = so3_left_jacobian(phi)
        J[:3, :3] = jl
        J[3:, 3:] = jl
        J[3:, :3] = _se3_q_matrix(rho, phi)
        return J


class SE23Group(MatrixLieGroup):
    """Extended poses (R, v, p), 5x5 matrices, tangent = (rot, vel, pos).

    Elements have the block structure ``[R v p; 0 1 0; 0 0 1]``.
    """

    name = "se23"
    dim = 9
    mat_dim = 5

    def hat(self, xi):
        xi = self._check_xi(xi)
        M = np.zeros((5, 5))
        M[:3, :3] = skew(xi[:3])
        M[:3, 3] = xi[3:6]
        M[:3, 4] = xi[6:]
        return M

    def _vee_raw(self, M):
        return np.concatenate(([M[2, 1], M[0, 2], M[1, 0]], M[:3, 3], M[:3, 4]))

    def exp(self, xi):
        xi = self._check_xi(xi)
        phi = xi[:3]
        jl = so3_left_jacobian(phi)
        M = np.eye(5)
        M[:3, :3] = so3_exp(phi)
        M[:3, 3] = jl @ xi[3:6]
        M[:3, 4] = jl @ xi[6:]
        return GroupElement(self, M)

    def log(self, g):
        M = g.matrix
        phi = so3_log(M[:3, :3])
        jl_inv = so3_left_jacobian_inv(phi)
        return np.concatenate((phi, jl_inv @ M[:3, 3], jl_inv @ M[:3, 4]))

    def _compose(self, a, b):
        out = np.eye(5)
        out[:3, :3] = a[:3, :3] @ b[:3, :3]
        out[:3, 3] = a[:3, :3] @ b[:3, 3] + a[:3, 3]
        out[:3, 4] = a[:3, :3] @ b[:3, 4] + a[:3, 4]
        return out

    def _inverse(self, a):
        out = np.eye(5)
        Rt = a[:3, :3].T
        out[:3, :3] = Rt
        out[:3, 3] = -Rt @ a[:3, 3]
        out[:3, 4] = -Rt @ a[:3, 4]
        return out

    def _validate(self, M):
        _validate_rotation(M[:3, :3])
        expected = np.array([[0.0, 0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]])
        if np.abs(M[3:] - expected).max() > MEMBERSHIP_TOL:
            raise InvalidGroupElementError(
                "bottom rows must be ((0,0,0,1,0), (0,0,0,0,1))"
            )

    def right_jacobian(self, xi):
        xi = self._check_xi(xi)
        phi = -xi[:3]
        jl = so3_left_jacobian(phi)
        J = np.zeros((9, 9))
        J[:3, :3] = jl
        J[3:6, 3:6] = jl
        J[6:, 6:] = jl
        J[3:6, :3] = _se3_q_matrix(-xi[3:6], phi)
        J[6:, :3] = _se3_q_matrix(-xi[6:], phi)
        return J


class GenericMatrixGroup(MatrixLieGroup):
    """Matrix group defined by an explicit algebra basis.

    exp and log fall back to scaling-and-squaring (and its inverse) on the
    ambient matrix; the right Jacobian uses the everywhere-convergent
    series over the adjoint. Intended for cross-validation and for groups
    without dedicated closed forms.
    """

    name = "generic"

    def __init__(self, basis: np.ndarray, name: str = "generic"):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise DimensionError("basis must have shape (dim, N, N)")
        basis.flags.writeable = False
        self._basis = basis
        self.dim = basis.shape[0]
        self.mat_dim = basis.shape[1]
        self.name = name
        flat = basis.reshape(self.dim, -1)
        self._vee_pinv = np.linalg.pinv(flat.T)

    def basis(self):
        return self._basis

    def hat(self, xi):
        xi = self._check_xi(xi)
        return np.tensordot(xi, self._basis, axes=1)

    def _vee_raw(self, M):
        return self._vee_pinv @ M.ravel()

    def exp(self, xi):
        return GroupElement(self, scipy.linalg.expm(self.hat(xi)))

    def log(self, g):
        M = scipy.linalg.logm(g.matrix)
        if np.abs(M.imag).max() > 1e-9:
            raise AngleNearPiError(
                "matrix logarithm left the real algebra (branch ambiguity)"
            )
        return self.vee(M.real)

    def right_jacobian(self, xi):
        return self.right_jacobian_series(xi)


SO3 = SO3Group()
SE3 = SE3Group()
SE23 = SE23Group()


def se23_from_parts(R: np.ndarray, v: np.ndarray, p: np.ndarray) -> GroupElement:
    """Assemble an SE_2(3) element from rotation, velocity and position."""
    M = np.eye(5)
    M[:3, :3] = R
    M[:3, 3] = v
    M[:3, 4] = p
    return GroupElement(SE23, M)
