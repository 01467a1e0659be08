"""Solve systems of equations ``chi @ d_j = y_j`` on a matrix Lie group.

Each equation is fed to the iterated invariant filter as a noise-free
measurement, back to back on a single belief with no propagation in
between. Every converged update pins the estimate to that equation's
solution set and zeroes the covariance along the measured directions, so
later updates cannot undo earlier equations: once all equations have been
processed the estimate lies in the intersection (when one exists near the
initial guess).

Convergence is local. The Gauss-Newton descent finds the intersection only
when the initial estimate is close enough to it; there is no global
guarantee, and callers are responsible for a sane initialization. A warning
is emitted when the first innovation looks too large for comfort.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .belief import GroupBelief, VectorBelief, factor
from .errors import InconsistentSystemError, NotConvergedError
from .filters import (
    GainMode,
    GNConfig,
    UpdateReport,
    iiekf_update_noise_free,
    kf_update,
)
from .groups import GroupElement, MatrixLieGroup

# A previously satisfied equation whose residual exceeds this after a later
# update signals that the system has no common solution near the iterate.
# One order above the default GN tolerance, to separate numerical drift
# from true inconsistency.
INCONSISTENCY_TOL = 1e-6

# Heuristic advisory bound on the first innovation norm; beyond it the
# initial guess is probably outside the Gauss-Newton basin.
MAX_INITIAL_INNOVATION = 1.0


class EquationForm(Enum):
    LEFT = "left"  # chi @ d = y
    RIGHT = "right"  # chi^-1 @ d = y


@dataclass
class EquationSystem:
    """Equations ``chi d_j = y_j`` (or ``chi^-1 d_j = y_j``) on one group.

    Right-form systems are normalized to left form by swapping d and y
    (``chi^-1 d = y`` is ``chi y = d``).
    """

    group: MatrixLieGroup
    equations: list[tuple[np.ndarray, np.ndarray]]
    form: EquationForm = EquationForm.LEFT

    def __post_init__(self):
        checked = []
        for d, y in self.equations:
            d = np.asarray(d, dtype=float)
            y = np.asarray(y, dtype=float)
            if d.shape != (self.group.mat_dim,) or y.shape != (self.group.mat_dim,):
                raise ValueError(
                    f"equation vectors must have length {self.group.mat_dim}"
                )
            checked.append((d, y))
        self.equations = checked

    def as_left(self) -> list[tuple[np.ndarray, np.ndarray]]:
        if self.form is EquationForm.RIGHT:
            return [(y, d) for d, y in self.equations]
        return self.equations


@dataclass
class SolveResult:
    solution: GroupElement
    residuals: np.ndarray
    final_rank: int
    rank_trace: list[int]
    per_equation_reports: list[UpdateReport] = field(default_factory=list)


def solve(
    system: EquationSystem,
    initial: GroupElement,
    P0: np.ndarray,
    cfg: GNConfig | None = None,
) -> SolveResult:
    """Solve a group equation system by sequential noise-free updates.

    Parameters
    ----------
    system:
        The equations, processed in the given order.
    initial:
        Starting estimate; must be close enough to the solution set for
        the Gauss-Newton descents to converge (local method).
    P0:
        Initial covariance, full rank.
    cfg:
        Gauss-Newton settings (the gain mode is forced to noise-free).

    Raises
    ------
    NotConvergedError
        If the Gauss-Newton loop for some equation fails to converge;
        ``equation_index`` identifies it.
    InconsistentSystemError
        If a previously satisfied equation is violated beyond
        ``INCONSISTENCY_TOL`` by a later update.
    """
    equations = system.as_left()
    belief = GroupBelief(initial, P0)
    reports: list[UpdateReport] = []
    rank_trace = [factor(belief.cov).rank]

    for j, (d, y) in enumerate(equations):
        z0 = initial.inverse().act(y) - d if j == 0 else None
        if z0 is not None and np.linalg.norm(z0) > MAX_INITIAL_INNOVATION:
            warnings.warn(
                f"first innovation norm {np.linalg.norm(z0):.3g} exceeds "
                f"{MAX_INITIAL_INNOVATION}; the initial estimate may be outside "
                "the Gauss-Newton basin of attraction",
                stacklevel=2,
            )
        belief, report = iiekf_update_noise_free(belief, d, y, cfg)
        reports.append(report)
        if not report.converged:
            raise NotConvergedError(
                f"Gauss-Newton did not converge on equation {j}", equation_index=j
            )
        rank_trace.append(factor(belief.cov).rank)
        for jj in range(j + 1):
            d_prev, y_prev = equations[jj]
            resid = float(np.linalg.norm(belief.mean.act(d_prev) - y_prev))
            if resid > INCONSISTENCY_TOL:
                raise InconsistentSystemError(
                    f"equation {jj} violated (residual {resid:.3g}) after "
                    f"updating with equation {j}; no common solution nearby"
                )

    residuals = np.array(
        [np.linalg.norm(belief.mean.act(d) - y) for d, y in equations]
    )
    return SolveResult(
        solution=belief.mean,
        residuals=residuals,
        final_rank=factor(belief.cov).rank,
        rank_trace=rank_trace,
        per_equation_reports=reports,
    )


def solve_linear(
    equations: list[tuple[np.ndarray, np.ndarray]],
    initial: np.ndarray,
    P0: np.ndarray,
) -> np.ndarray:
    """Solve linear equations ``H_j x = y_j`` by sequential noise-free updates.

    The row matrices must be independent. The final state satisfies every
    equation regardless of the feed order; with fewer equations than
    unknowns it lands on the solution of minimal Mahalanobis distance from
    the initial state.

    Raises
    ------
    InconsistentSystemError
        If any equation's residual exceeds ``INCONSISTENCY_TOL`` at the end.
    """
    belief = VectorBelief(np.asarray(initial, dtype=float), P0)
    rows = []
    for H, y in equations:
        H = np.atleast_2d(np.asarray(H, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        rows.append((H, y))
        belief, _ = kf_update(belief, H, y, gain_mode=GainMode.NOISE_FREE)

    for j, (H, y) in enumerate(rows):
        resid = float(np.linalg.norm(H @ belief.mean - y))
        if resid > INCONSISTENCY_TOL:
            raise InconsistentSystemError(
                f"equation {j} unsatisfied (residual {resid:.3g}); "
                "system is inconsistent"
            )
    return belief.mean
