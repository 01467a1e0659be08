"""Lie group machinery: hat/vee, exp/log, Jacobians, group axioms."""

import math

import numpy as np
import pytest
import scipy.special

from liekf.errors import (
    AngleNearPiError,
    DimensionError,
    InvalidGroupElementError,
    NotInAlgebraError,
)
from liekf.groups import (
    SE3,
    SE23,
    SO3,
    GenericMatrixGroup,
    se23_from_parts,
    skew,
)

GROUPS = [SO3, SE3, SE23]


def matrix_exp_series(M, terms=60):
    """Truncated power-series matrix exponential, used as an oracle."""
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def random_tangent(rng, group, max_norm):
    xi = rng.normal(size=group.dim)
    n = np.linalg.norm(xi)
    if n > max_norm:
        xi *= max_norm / n
    return xi


class TestHatVee:
    def test_so3_hat_known(self):
        H = SO3.hat(np.array([1.0, 2.0, 3.0]))
        expected = np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)
        np.testing.assert_array_equal(H, expected)

    def test_hat_zero_is_zero(self):
        for g in GROUPS:
            np.testing.assert_array_equal(
                g.hat(np.zeros(g.dim)), np.zeros((g.mat_dim, g.mat_dim))
            )

    def test_se23_hat_block_structure(self):
        xi = np.arange(1.0, 10.0)
        M = SE23.hat(xi)
        np.testing.assert_array_equal(M[:3, :3], SO3.hat(xi[:3]))
        np.testing.assert_array_equal(M[:3, 3], xi[3:6])
        np.testing.assert_array_equal(M[:3, 4], xi[6:])
        np.testing.assert_array_equal(M[3:], np.zeros((2, 5)))

    def test_se23_exp_of_hat_preserves_block_shape(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            xi = random_tangent(rng, SE23, 2.0)
            M = SE23.exp(xi).matrix
            # bottom rows of [R v p; 0 1 0; 0 0 1]
            np.testing.assert_allclose(
                M[3:], [[0, 0, 0, 1, 0], [0, 0, 0, 0, 1]], atol=1e-12
            )
            np.testing.assert_allclose(M[:3, :3] @ M[:3, :3].T, np.eye(3), atol=1e-12)

    def test_vee_inverts_hat_exactly(self):
        np.testing.assert_array_equal(
            SO3.vee(np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)),
            [1.0, 2.0, 3.0],
        )
        rng = np.random.default_rng(2)
        for g in GROUPS:
            np.testing.assert_array_equal(g.vee(np.zeros((g.mat_dim, g.mat_dim))), np.zeros(g.dim))
            for _ in range(20):
                xi = rng.normal(size=g.dim)
                np.testing.assert_allclose(g.vee(g.hat(xi)), xi, atol=1e-14)

    def test_vee_rejects_non_algebra_matrix(self):
        with pytest.raises(NotInAlgebraError):
            SO3.vee(np.eye(3))
        with pytest.raises(DimensionError):
            SO3.vee(np.eye(4))

    def test_hat_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            SO3.hat(np.zeros(4))


class TestExpLog:
    def test_exp_zero_is_identity(self):
        for g in GROUPS:
            np.testing.assert_array_equal(
                g.exp(np.zeros(g.dim)).matrix, np.eye(g.mat_dim)
            )

    def test_so3_quarter_turn_maps_e2_to_e3(self):
        R = SO3.exp(np.array([np.pi / 2.0, 0.0, 0.0]))
        np.testing.assert_allclose(R.act(np.array([0.0, 1.0, 0.0])), [0, 0, 1], atol=1e-12)
        series = matrix_exp_series(SO3.hat(np.array([np.pi / 2.0, 0.0, 0.0])))
        np.testing.assert_allclose(R.matrix, series, atol=1e-10)

    def test_se23_exp_matches_series_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            xi = random_tangent(rng, SE23, 1.0)
            expected = matrix_exp_series(SE23.hat(xi))
            np.testing.assert_allclose(SE23.exp(xi).matrix, expected, atol=1e-12)

    def test_log_identity_is_zero(self):
        for g in GROUPS:
            np.testing.assert_array_equal(g.log(g.identity()), np.zeros(g.dim))

    @pytest.mark.parametrize("group", [SO3, SE23], ids=lambda g: g.name)
    def test_exp_log_round_trip(self, group):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(300):
            xi = random_tangent(rng, group, 3.0)
            worst = max(worst, np.abs(group.log(group.exp(xi)) - xi).max())
        assert worst <= 1e-9

    def test_log_raises_near_pi(self):
        with pytest.raises(AngleNearPiError):
            SO3.log(SO3.exp(np.array([np.pi, 0.0, 0.0])))
        # just inside the guard band is fine
        SO3.log(SO3.exp(np.array([np.pi - 1e-4, 0.0, 0.0])))

    def test_small_angle_branch_agrees_with_series(self):
        for scale in (1e-5, 1e-7, 1e-9):
            xi = np.array([1.0, -2.0, 0.5]) * scale
            np.testing.assert_allclose(
                SO3.exp(xi).matrix, matrix_exp_series(SO3.hat(xi)), atol=1e-15
            )
            np.testing.assert_allclose(SO3.log(SO3.exp(xi)), xi, rtol=1e-12)


class TestRightJacobian:
    def test_at_zero_is_identity(self):
        for g in GROUPS:
            np.testing.assert_allclose(g.right_jacobian(np.zeros(g.dim)), np.eye(g.dim))
            np.testing.assert_allclose(g.left_jacobian(np.zeros(g.dim)), np.eye(g.dim))

    @pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
    def test_defining_relation_finite_difference(self, group):
        rng = np.random.default_rng(5)
        for _ in range(25):
            xi = random_tangent(rng, group, 1.5)
            delta = rng.normal(size=group.dim)
            delta *= 1e-5 / np.linalg.norm(delta)
            J = group.right_jacobian(xi)
            lhs = group.exp(xi + delta).matrix
            rhs = group.exp(xi).matrix @ group.exp(J @ delta).matrix
            assert np.linalg.norm(lhs - rhs) <= 1e-8

    @pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
    def test_defining_relation_second_order(self, group):
        # halving delta must shrink the defect by ~4x (observed order >= 1.9)
        rng = np.random.default_rng(6)
        xi = random_tangent(rng, group, 1.0)
        direction = rng.normal(size=group.dim)
        direction /= np.linalg.norm(direction)
        J = group.right_jacobian(xi)

        def defect(eps):
            delta = eps * direction
            lhs = group.exp(xi + delta).matrix
            rhs = group.exp(xi).matrix @ group.exp(J @ delta).matrix
            return np.linalg.norm(lhs - rhs)

        d1, d2 = defect(1e-3), defect(5e-4)
        order = math.log2(d1 / d2)
        assert order >= 1.9

    def test_series_matches_closed_form_so3_basis(self):
        generic = GenericMatrixGroup(SO3.basis(), name="generic-so3")
        rng = np.random.default_rng(7)
        for _ in range(25):
            xi = random_tangent(rng, SO3, 2.0)
            np.testing.assert_allclose(
                generic.right_jacobian(xi), SO3.right_jacobian(xi), atol=1e-10
            )

    @pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
    def test_closed_form_matches_series(self, group):
        rng = np.random.default_rng(8)
        for _ in range(25):
            xi = random_tangent(rng, group, 2.0)
            np.testing.assert_allclose(
                group.right_jacobian(xi),
                group.right_jacobian_series(xi),
                atol=1e-10,
            )

    def test_left_is_mirrored_right(self):
        rng = np.random.default_rng(9)
        for g in GROUPS:
            for _ in range(100 // len(GROUPS) + 1):
                xi = rng.normal(size=g.dim)
                np.testing.assert_allclose(
                    g.left_jacobian(xi), g.right_jacobian(-xi), atol=1e-14
                )

    def test_bernoulli_series_inverts_right_jacobian(self):
        # sum_n B_n/n! ad^n (second Bernoulli numbers, B_1 = +1/2) is the
        # inverse of J_r; checks the series against an independent identity.
        rng = np.random.default_rng(10)
        bern = scipy.special.bernoulli(40)
        bern[1] = +0.5
        for group in (SO3, SE23):
            xi = random_tangent(rng, group, 1.0)
            ad = group.adjoint_algebra(xi)
            term = np.eye(group.dim)
            inv = bern[0] * np.eye(group.dim)
            for n in range(1, 41):
                term = term @ ad / n
                inv = inv + bern[n] * term
            np.testing.assert_allclose(
                group.right_jacobian(xi) @ inv, np.eye(group.dim), atol=1e-10
            )


class TestActionAndComposition:
    def test_identity_action(self):
        d = np.array([1.0, 2.0, 3.0, 0.0, 1.0])
        np.testing.assert_array_equal(SE23.identity().act(d), d)

    def test_se23_action_picks_position_column(self):
        g = se23_from_parts(np.eye(3), np.zeros(3), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(
            g.act(np.array([0.0, 0.0, 0.0, 0.0, 1.0])), [1, 2, 3, 0, 1]
        )

    def test_so3_action_rodrigues(self):
        g = SO3.exp(np.array([np.pi / 2.0, 0.0, 0.0]))
        np.testing.assert_allclose(g.act(np.array([0.0, 1.0, 0.0])), [0, 0, 1], atol=1e-12)

    def test_action_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            SO3.identity().act(np.zeros(5))

    @pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
    def test_compose_inverse_identity(self, group):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = group.exp(random_tangent(rng, group, 2.0))
            res = a.compose(a.inverse()).matrix
            np.testing.assert_allclose(res, np.eye(group.mat_dim), atol=1e-12)

    @pytest.mark.parametrize("group", GROUPS, ids=lambda g: g.name)
    def test_compose_associative(self, group):
        rng = np.random.default_rng(12)
        for _ in range(20):
            a, b, c = (group.exp(random_tangent(rng, group, 2.0)) for _ in range(3))
            lhs = (a @ b) @ c
            rhs = a @ (b @ c)
            np.testing.assert_allclose(lhs.matrix, rhs.matrix, atol=1e-12)

    def test_inverse_of_identity(self):
        for g in GROUPS:
            np.testing.assert_array_equal(
                g.identity().inverse().matrix, np.eye(g.mat_dim)
            )

    def test_se23_inverse_closed_form(self):
        rng = np.random.default_rng(13)
        g = SE23.exp(rng.normal(size=9))
        np.testing.assert_allclose(
            g.inverse().matrix, np.linalg.inv(g.matrix), atol=1e-12
        )


class TestValidation:
    def test_exp_output_passes_invariants(self):
        rng = np.random.default_rng(14)
        for g in GROUPS:
            for _ in range(10):
                M = g.exp(random_tangent(rng, g, 2.5)).matrix
                g.from_matrix(M)  # must not raise

    def test_from_matrix_rejects_non_orthonormal(self):
        with pytest.raises(InvalidGroupElementError):
            SO3.from_matrix(np.eye(3) * 1.01)

    def test_from_matrix_rejects_bad_bottom_rows(self):
        M = np.eye(5)
        M[3, 0] = 0.5
        with pytest.raises(InvalidGroupElementError):
            SE23.from_matrix(M)

    def test_non_finite_rejected(self):
        M = np.eye(3)
        M[0, 0] = np.nan
        with pytest.raises(InvalidGroupElementError):
            SO3.from_matrix(M)


class TestGenericGroup:
    def test_exp_log_round_trip(self):
        generic = GenericMatrixGroup(SE23.basis(), name="generic-se23")
        rng = np.random.default_rng(15)
        for _ in range(10):
            xi = random_tangent(rng, generic, 1.5)
            np.testing.assert_allclose(generic.log(generic.exp(xi)), xi, atol=1e-9)

    def test_matches_closed_forms_on_se23(self):
        generic = GenericMatrixGroup(SE23.basis(), name="generic-se23")
        rng = np.random.default_rng(16)
        for _ in range(15):
            xi = random_tangent(rng, generic, 2.0)
            np.testing.assert_allclose(
                generic.exp(xi).matrix, SE23.exp(xi).matrix, atol=1e-10
            )
            g = SE23.exp(xi)
            np.testing.assert_allclose(
                generic.log(generic.from_matrix(g.matrix)), SE23.log(g), atol=1e-10
            )

    def test_informative_rows_derived_from_basis(self):
        np.testing.assert_array_equal(SO3.informative_rows, [0, 1, 2])
        np.testing.assert_array_equal(SE23.informative_rows, [0, 1, 2])
        generic = GenericMatrixGroup(SE23.basis())
        np.testing.assert_array_equal(generic.informative_rows, [0, 1, 2])

    def test_skew_is_cross_product(self):
        rng = np.random.default_rng(17)
        a, b = rng.normal(size=3), rng.normal(size=3)
        np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)
