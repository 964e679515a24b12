"""Core piece-wise constant system machinery."""

import numpy as np
import pytest

from oracles import o_expm, o_rank
from slamobs.analysis import case_scenario
from slamobs.model import augment_scenario, ins_error_f
from slamobs.pwcs import (
    PwcsStripe,
    is_functional_observable,
    lom,
    null_space,
    numerical_rank,
    skew,
    state_transition,
    tom,
)


def case2_system():
    return augment_scenario(case_scenario(2))


def case2_segment1_stripe():
    """Single-feature local stripe of the case-2 first segment (n = 12)."""
    scenario = case_scenario(2)
    seg = scenario.segments[0]
    F = np.zeros((12, 12))
    F[0:9, 0:9] = ins_error_f(seg.specific_force)
    H = np.zeros((3, 12))
    H[:, 0:3] = -np.eye(3)
    H[:, 6:9] = skew(seg.feature_rel_pos["f1"])
    H[:, 9:12] = np.eye(3)
    return PwcsStripe(F=F, H=H, delta=seg.duration)


class TestSkew:
    def test_e1_cross_e2(self):
        np.testing.assert_allclose(skew([1, 0, 0]) @ [0, 1, 0], [0, 0, 1])

    def test_zero_vector(self):
        np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))

    def test_antisymmetry_exact(self):
        S = skew([1, 2, 3])
        np.testing.assert_array_equal(S + S.T, np.zeros((3, 3)))
        np.testing.assert_array_equal(np.diag(S), np.zeros(3))

    def test_matches_cross_product(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            v = rng.normal(scale=10.0, size=3)
            w = rng.normal(scale=10.0, size=3)
            np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-12 * (1 + np.abs(np.cross(v, w)).max()))

    @pytest.mark.parametrize("bad", [[np.nan, 0, 0], [0, np.inf, 0], [1, 2, -np.inf]])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            skew(bad)


class TestPwcsStripe:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            PwcsStripe(F=np.eye(4), H=np.zeros((2, 3)), delta=1.0)

    def test_non_square_f(self):
        with pytest.raises(ValueError):
            PwcsStripe(F=np.zeros((3, 4)), H=np.zeros((1, 4)), delta=1.0)

    @pytest.mark.parametrize("delta", [0.0, -1.0])
    def test_non_positive_delta(self, delta):
        with pytest.raises(ValueError):
            PwcsStripe(F=np.eye(2), H=np.eye(2), delta=delta)

    def test_empty_observation_allowed(self):
        stripe = PwcsStripe(F=np.zeros((9, 9)), H=np.zeros((0, 9)), delta=1.0)
        assert stripe.n == 9


class TestStateTransition:
    def test_zero_dynamics(self):
        np.testing.assert_array_equal(state_transition(np.zeros((4, 4)), 12.5), np.eye(4))

    def test_nilpotent_exact_matches_series_oracle(self):
        F = ins_error_f([0.0, 0.0, 9.81])
        assert not (F @ F @ F).any()
        got = state_transition(F, 50.0, "exact")
        want = np.array(o_expm(F.tolist(), 50.0))
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12 * np.abs(want).max())

    def test_first_order_drops_coupling_into_position(self):
        F = ins_error_f([0.0, 0.0, 9.81])
        delta = 50.0
        exact = state_transition(F, delta, "exact")
        first = state_transition(F, delta, "first_order")
        np.testing.assert_array_equal(first, np.eye(9) + F * delta)
        # the second-order term lands in the position/attitude block only
        diff = exact - first
        np.testing.assert_allclose(diff[0:3, 6:9], skew([0, 0, 9.81]) * delta**2 / 2)
        diff[0:3, 6:9] = 0.0
        assert not diff.any()

    def test_inverse_and_determinant(self):
        F = np.zeros((15, 15))
        F[0:9, 0:9] = ins_error_f([0.3, -0.2, 9.81])
        phi = state_transition(F, 50.0, "exact")
        np.testing.assert_allclose(phi @ np.linalg.inv(phi), np.eye(15), atol=1e-10)
        assert np.trace(F) == 0.0
        assert abs(np.linalg.det(phi) - 1.0) < 1e-9

    def test_general_fallback_matches_series_oracle(self):
        rng = np.random.default_rng(3)
        F = rng.normal(scale=0.2, size=(5, 5))
        got = state_transition(F, 1.7, "exact")
        want = np.array(o_expm(F.tolist(), 1.7))
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_rejects_bad_mode_and_shape(self):
        with pytest.raises(ValueError):
            state_transition(np.eye(2), 1.0, "approximate")
        with pytest.raises(ValueError):
            state_transition(np.zeros((2, 3)), 1.0)
        with pytest.raises(ValueError):
            state_transition(np.eye(2), 0.0)


class TestLom:
    def test_case2_segment1_rank_eight(self):
        matrix = lom(case2_segment1_stripe(), max_power=2)
        assert matrix.shape == (9, 12)
        assert numerical_rank(matrix) == 8

    def test_zero_observation_gives_zero_matrix(self):
        stripe = PwcsStripe(F=np.eye(4), H=np.zeros((2, 4)), delta=1.0)
        matrix = lom(stripe, max_power=3)
        assert matrix.shape == (8, 4)
        assert not matrix.any()
        assert numerical_rank(matrix) == 0

    def test_zero_force_rank_six(self):
        # velocity rows survive, the attitude-coupling rows vanish
        stripe = case2_segment1_stripe()
        F = stripe.F.copy()
        F[3:6, 6:9] = 0.0
        degraded = PwcsStripe(F=F, H=stripe.H, delta=stripe.delta)
        assert numerical_rank(lom(degraded)) == 6

    def test_max_power_validation(self):
        with pytest.raises(ValueError):
            lom(case2_segment1_stripe(), max_power=0)


class TestTom:
    def test_single_stripe_equals_lom(self):
        stripe = case2_segment1_stripe()
        np.testing.assert_array_equal(tom([stripe]), lom(stripe))

    def test_case2_rank_twelve_of_fifteen(self):
        system = case2_system()
        matrix = tom(system.stripes)
        assert matrix.shape[1] == 15
        assert numerical_rank(matrix) == 12

    def test_identical_nilpotent_stripes_add_no_rank(self):
        stripe = case2_segment1_stripe()
        single = numerical_rank(lom(stripe))
        double = numerical_rank(tom([stripe, stripe]))
        assert double == single

    def test_empty_and_inconsistent_inputs(self):
        with pytest.raises(ValueError):
            tom([])
        a = PwcsStripe(F=np.zeros((3, 3)), H=np.eye(3), delta=1.0)
        b = PwcsStripe(F=np.zeros((4, 4)), H=np.eye(4), delta=1.0)
        with pytest.raises(ValueError):
            tom([a, b])


class TestNumericalRank:
    def test_identity(self):
        assert numerical_rank(np.eye(5)) == 5

    def test_tiny_singular_value_below_threshold(self):
        assert numerical_rank(np.diag([1.0, 1e-14]), rel_tol=1e-10) == 1

    def test_zero_matrix(self):
        assert numerical_rank(np.zeros((4, 6))) == 0

    def test_case2_total_matrix(self):
        assert numerical_rank(tom(case2_system().stripes)) == 12

    def test_rank_plus_nullity_equals_cols(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            rows, cols = rng.integers(1, 12, size=2)
            rank_target = int(rng.integers(0, min(rows, cols) + 1))
            M = (
                rng.normal(size=(rows, rank_target)) @ rng.normal(size=(rank_target, cols))
                if rank_target
                else np.zeros((rows, cols))
            )
            rank = numerical_rank(M)
            basis = null_space(M)
            assert rank + basis.dim == cols

    def test_rank_invariant_under_row_permutation_and_scaling(self):
        rng = np.random.default_rng(13)
        base = tom(case2_system().stripes)
        want = numerical_rank(base)
        for _ in range(100):
            perm = rng.permutation(base.shape[0])
            scales = rng.uniform(0.1, 10.0, size=base.shape[0]) * rng.choice(
                [-1.0, 1.0], size=base.shape[0]
            )
            assert numerical_rank(base[perm] * scales[:, None]) == want


class TestNullSpace:
    def test_identity_has_trivial_kernel(self):
        basis = null_space(np.eye(6))
        assert basis.dim == 0
        assert basis.vectors.shape == (6, 0)

    def test_zero_matrix_full_kernel(self):
        basis = null_space(np.zeros((4, 3)))
        assert basis.dim == 3
        np.testing.assert_allclose(basis.vectors.T @ basis.vectors, np.eye(3), atol=1e-12)

    def test_case2_kernel_dimension_and_annihilation(self):
        matrix = tom(case2_system().stripes)
        basis = null_space(matrix)
        assert basis.dim == 3
        scale = np.linalg.norm(matrix)
        for k in range(basis.dim):
            assert np.linalg.norm(matrix @ basis.vectors[:, k]) <= 1e-10 * scale
        gram = basis.vectors.T @ basis.vectors
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-10)

    def test_empty_row_matrix(self):
        basis = null_space(np.zeros((0, 9)))
        assert basis.dim == 9


class TestIsFunctionalObservable:
    def test_full_column_rank_sees_everything(self):
        rng = np.random.default_rng(5)
        M = rng.normal(size=(8, 4))
        for _ in range(5):
            assert is_functional_observable(M, rng.normal(size=4))

    def test_zero_matrix_sees_nothing(self):
        assert not is_functional_observable(np.zeros((3, 5)), np.ones(5))

    def test_case2_position_minus_feature2_observable(self):
        matrix = tom(case2_system().stripes)
        w = np.zeros(15)
        w[0], w[12] = 1.0, -1.0  # north position error minus feature-2 north error
        assert is_functional_observable(matrix, w)
        alone = np.zeros(15)
        alone[0] = 1.0
        assert not is_functional_observable(matrix, alone)

    def test_every_row_is_observable(self):
        matrix = tom(case2_system().stripes)
        for row in matrix:
            if row.any():
                assert is_functional_observable(matrix, row)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            is_functional_observable(np.eye(3), np.ones(4))


def test_oracle_rank_agrees_on_case2():
    matrix = tom(case2_system().stripes)
    assert numerical_rank(matrix) == o_rank(matrix)
