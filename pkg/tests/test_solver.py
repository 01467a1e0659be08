"""Sequential noise-free solving of equation systems."""

import itertools

import numpy as np
import pytest

from liekf.errors import InconsistentSystemError
from liekf.filters import GNConfig
from liekf.groups import SE23, SO3
from liekf.solver import (
    EquationForm,
    EquationSystem,
    solve,
    solve_linear,
)

E1, E2, E3 = np.eye(3)


class TestGroupSolve:
    def test_already_satisfied_single_equation(self):
        system = EquationSystem(SO3, [(E3, E3)])
        res = solve(system, SO3.identity(), np.eye(3))
        np.testing.assert_array_equal(res.solution.matrix, np.eye(3))
        assert res.per_equation_reports[0].iterations == 1
        assert res.residuals.max() <= 1e-12

    def test_so3_two_equations_from_offset_start(self):
        R_star = SO3.exp(np.array([0.2, -0.1, 0.3]))
        equations = [(E1, R_star.act(E1)), (E2, R_star.act(E2))]
        initial = SO3.exp(np.array([0.05, 0.0, 0.0])).compose(R_star)
        res = solve(EquationSystem(SO3, equations), initial, np.eye(3))
        assert res.residuals.max() <= 1e-8
        # iterates of equation 2 never leave the set fixed by equation 1;
        # each reported iterate is relative to the pre-update mean
        rep1, rep2 = res.per_equation_reports
        mean1 = initial.compose(SO3.exp(rep1.iterates[-1]))
        d1, y1 = equations[0]
        for xi in rep2.iterates:
            candidate = mean1.compose(SO3.exp(xi))
            assert np.linalg.norm(candidate.act(d1) - y1) <= 1e-8
            assert np.linalg.norm(np.cross(xi, d1)) <= 1e-10

    def test_rank_trace_two_position_equations(self):
        # two position-type directions share one constrained rotation axis,
        # so the second update removes only two fresh directions: 9 -> 6 -> 4
        chi_star = SE23.exp(np.array([0.2, -0.1, 0.15, 0.5, -0.3, 0.2, 1.0, 0.5, -0.7]))
        d1 = np.array([0.0, 0.0, 2.0, 0.0, 1.0])
        d2 = np.array([0.0, 0.0, 5.0, 0.0, 1.0])
        equations = [(d1, chi_star.act(d1)), (d2, chi_star.act(d2))]
        initial = chi_star.compose(SE23.exp(0.02 * np.ones(9)))
        res = solve(EquationSystem(SE23, equations), initial, np.eye(9))
        assert res.rank_trace == [9, 6, 4]
        assert res.residuals.max() <= 1e-8

    def test_rank_trace_position_and_velocity_equations(self):
        # independent 3-dimensional row spaces: 9 -> 6 -> 3
        chi_star = SE23.exp(np.array([0.2, -0.1, 0.15, 0.5, -0.3, 0.2, 1.0, 0.5, -0.7]))
        d1 = np.array([0.0, 0.0, 2.0, 0.0, 1.0])
        d2 = np.array([0.0, 0.0, 1.0, 1.0, 0.0])
        equations = [(d1, chi_star.act(d1)), (d2, chi_star.act(d2))]
        initial = chi_star.compose(SE23.exp(0.02 * np.ones(9)))
        res = solve(EquationSystem(SE23, equations), initial, np.eye(9))
        assert res.rank_trace == [9, 6, 3]
        assert res.final_rank == 3
        assert res.residuals.max() <= 1e-8

    def test_rank_strictly_decreases_per_new_equation(self):
        rng = np.random.default_rng(0)
        chi_star = SO3.exp(rng.normal(size=3) * 0.3)
        equations = [(E1, chi_star.act(E1)), (E2, chi_star.act(E2))]
        initial = chi_star.compose(SO3.exp(rng.normal(size=3) * 0.05))
        res = solve(EquationSystem(SO3, equations), initial, np.eye(3))
        assert all(b < a for a, b in zip(res.rank_trace, res.rank_trace[1:]))

    def test_order_invariance_of_residuals(self):
        rng = np.random.default_rng(1)
        chi_star = SO3.exp(rng.normal(size=3) * 0.3)
        base = [(E1, chi_star.act(E1)), (E2, chi_star.act(E2))]
        initial = chi_star.compose(SO3.exp(rng.normal(size=3) * 0.04))
        for perm in itertools.permutations(base):
            res = solve(EquationSystem(SO3, list(perm)), initial, np.eye(3))
            assert res.residuals.max() <= 1e-8

    def test_right_form_normalized_by_swapping(self):
        chi_star = SO3.exp(np.array([0.1, 0.2, -0.15]))
        # chi^-1 d = y  <=>  chi y = d
        d = E1
        y = chi_star.inverse().act(d)
        system = EquationSystem(SO3, [(d, y)], form=EquationForm.RIGHT)
        res = solve(system, SO3.identity(), np.eye(3))
        assert np.linalg.norm(res.solution.inverse().act(d) - y) <= 1e-9

    def test_inconsistent_system_detected(self):
        # no rotation fixes e3 while also sending e1 to e3
        equations = [(E3, E3), (E1, E3)]
        with pytest.raises(InconsistentSystemError):
            solve(EquationSystem(SO3, equations), SO3.identity(), np.eye(3))

    def test_far_initialization_warns(self):
        chi_star = SO3.exp(np.array([0.2, 0.1, -0.3]))
        equations = [(np.array([0.0, 0.0, 5.0]), chi_star.act(np.array([0.0, 0.0, 5.0])))]
        initial = SO3.exp(np.array([0.0, 2.0, 0.0]))
        with pytest.warns(UserWarning, match="basin"):
            solve(EquationSystem(SO3, equations), initial, np.eye(3))


class TestLinearSolve:
    A = np.array([[3.0, 5.0, 1.0], [7.0, -2.0, 4.0], [-6.0, 3.0, 2.0]])
    b = np.array([3.0, 4.0, 2.0])

    def test_three_by_three_any_order_matches_dense_solve(self):
        expected = np.linalg.solve(self.A, self.b)
        rng = np.random.default_rng(2)
        for perm in itertools.permutations(range(3)):
            x0 = rng.normal(size=3) * 5.0
            eqs = [(self.A[i : i + 1], self.b[i : i + 1]) for i in perm]
            x = solve_linear(eqs, x0, np.eye(3))
            np.testing.assert_allclose(x, expected, atol=1e-9)

    def test_underdetermined_gives_minimum_norm_solution(self):
        # closed-form oracle: x = H^T (H H^T)^-1 y from x0 = 0, P0 = I
        rng = np.random.default_rng(3)
        H = rng.normal(size=(1, 3))
        y = np.array([2.0])
        x = solve_linear([(H, y)], np.zeros(3), np.eye(3))
        expected = H.T @ np.linalg.solve(H @ H.T, y)
        np.testing.assert_allclose(x, expected.ravel(), atol=1e-10)

    def test_all_equations_satisfied_to_tight_tolerance(self):
        x = solve_linear(
            [(self.A[i : i + 1], self.b[i : i + 1]) for i in range(3)],
            np.array([100.0, -50.0, 7.0]),
            np.eye(3),
        )
        assert np.abs(self.A @ x - self.b).max() <= 1e-10

    def test_inconsistent_linear_system_raises(self):
        eqs = [
            (np.array([[1.0, 0.0]]), np.array([0.0])),
            (np.array([[1.0, 0.0]]), np.array([1.0])),
        ]
        with pytest.raises(InconsistentSystemError):
            solve_linear(eqs, np.zeros(2), np.eye(2))


class TestEquationSystemValidation:
    def test_dimension_check(self):
        with pytest.raises(ValueError):
            EquationSystem(SO3, [(np.zeros(4), np.zeros(4))])

    def test_left_form_passthrough(self):
        system = EquationSystem(SO3, [(E1, E2)])
        assert [(tuple(d), tuple(y)) for d, y in system.as_left()] == [
            ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
        ]
