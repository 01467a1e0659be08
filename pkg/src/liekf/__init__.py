"""Invariant Kalman filtering on matrix Lie groups.

Core pieces:

- :mod:`liekf.groups`: SO(3), SE(3), SE_2(3) and generic matrix groups.
- :mod:`liekf.belief`: Gaussian/concentrated-Gaussian beliefs and gains.
- :mod:`liekf.filters`: KF, EKF, iterated EKF, invariant EKF and its
  Gauss-Newton iterated variant.
- :mod:`liekf.solver`: systems of equations ``chi d = y`` on a group,
  solved by sequential noise-free updates.
- :mod:`liekf.crane`: crane-hook IMU benchmark models and scenarios.
- :mod:`liekf.metrics`: error norms, ANEES and chi-square intervals.
- :mod:`liekf.bench` / :mod:`liekf.cli`: Monte Carlo driver and CLI.
"""

__version__ = "0.1.0"

from .groups import SO3, SE3, SE23, GenericMatrixGroup, GroupElement
from .belief import (
    CovFactor,
    GroupBelief,
    VectorBelief,
    factor,
    noise_free_gain,
    regularized_gain,
    riccati_update,
    standard_gain,
)
from .filters import (
    GainMode,
    GNConfig,
    InvariantModel,
    LinearModel,
    NonlinearModel,
    UpdateReport,
    check_compatibility,
    ekf_predict,
    ekf_update,
    iekf_predict,
    iekf_update,
    iiekf_update,
    iiekf_update_noise_free,
    invariant_output_jacobian,
    iterekf_update,
    kf_predict,
    kf_update,
)
from .solver import EquationForm, EquationSystem, SolveResult, solve, solve_linear
from .metrics import AneesInterval, anees, anees_projected, chi2_interval, ekf_error, invariant_error

__all__ = [
    "__version__",
    "SO3",
    "SE3",
    "SE23",
    "GenericMatrixGroup",
    "GroupElement",
    "CovFactor",
    "GroupBelief",
    "VectorBelief",
    "factor",
    "noise_free_gain",
    "regularized_gain",
    "riccati_update",
    "standard_gain",
    "GainMode",
    "GNConfig",
    "InvariantModel",
    "LinearModel",
    "NonlinearModel",
    "UpdateReport",
    "check_compatibility",
    "ekf_predict",
    "ekf_update",
    "iekf_predict",
    "iekf_update",
    "iiekf_update",
    "iiekf_update_noise_free",
    "invariant_output_jacobian",
    "iterekf_update",
    "kf_predict",
    "kf_update",
    "EquationForm",
    "EquationSystem",
    "SolveResult",
    "solve",
    "solve_linear",
    "AneesInterval",
    "anees",
    "anees_projected",
    "chi2_interval",
    "ekf_error",
    "invariant_error",
]
