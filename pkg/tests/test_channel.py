"""Unit tests for channel.py module.

Tests the success probability formulas and the slot simulator against each other.
"""

import math

import numpy as np
import pytest

from spatial_aoi.channel import (
    BROADCAST,
    COLLECTION,
    LOG_SPACE_THRESHOLD,
    PRINTED,
    RAYLEIGH,
    NetworkParams,
    SlotOutcome,
    broadcast_success_probs,
    collection_success_probs,
    constant_C,
    draw_slot,
    draw_slots,
    joint_fail_prob_broadcast,
    joint_succ_prob_broadcast,
    joint_success_table,
    path_loss,
    succ_prob_broadcast_conditional,
    succ_prob_collection_conditional,
    succ_prob_collection_semi,
    succ_prob_spatial_average,
)
from spatial_aoi.geometry import (
    DivergentInterferenceError,
    Point,
    Realization,
    SingularityError,
    sample_interferer_process,
)


class TestNetworkParams:
    """Test NetworkParams validation."""

    def test_defaults(self, params):
        assert (params.lam, params.theta, params.p, params.beta, params.r) == (
            0.01,
            5.0,
            0.2,
            4.0,
            10.0,
        )
        assert params.delta == 0.5
        assert params.interferer_lam == 0.01

    def test_separate_interferer_intensity(self):
        assert NetworkParams(interferer_lambda=0.0).interferer_lam == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"theta": 1.0},
            {"p": 0.0},
            {"p": 1.5},
            {"lam": -0.01},
            {"r": 0.0},
            {"theta": math.nan},
            {"interferer_lambda": -1.0},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NetworkParams(**kwargs)

    def test_rejects_divergent_beta(self):
        with pytest.raises(DivergentInterferenceError):
            NetworkParams(beta=2.0)


class TestPathLossAndConstant:
    """Test path_loss() and constant_C()."""

    def test_path_loss(self):
        assert path_loss(Point(2.0, 0.0), 4.0) == 0.0625
        assert path_loss((0.0, 3.0), 2.5) == pytest.approx(3.0**-2.5)

    def test_path_loss_singular_at_origin(self):
        with pytest.raises(SingularityError):
            path_loss((0.0, 0.0))

    def test_constant_unit_threshold(self):
        """Gamma(3/2) Gamma(1/2) = pi/2."""
        assert constant_C(1.0, 4.0) == pytest.approx(math.pi / 2, rel=1e-12)

    def test_constant_scales_with_threshold(self, params):
        assert params.C == pytest.approx(math.pi / 2 * math.sqrt(5.0), rel=1e-12)

    def test_constant_rejects_divergent_beta(self):
        with pytest.raises(DivergentInterferenceError):
            constant_C(5.0, 2.0)


class TestSpatialAverage:
    """Test succ_prob_spatial_average()."""

    def test_equals_p_at_zero_distance(self, params):
        assert succ_prob_spatial_average(0.0, params) == params.p

    def test_decreasing_in_distance(self, params):
        values = [succ_prob_spatial_average(d, params) for d in (1.0, 5.0, 10.0, 15.0)]

        assert all(b < a for a, b in zip(values, values[1:]))

    def test_closed_form(self, params):
        expected = 0.2 * math.exp(-0.2 * 0.01 * math.pi * params.C * 100.0)

        assert succ_prob_spatial_average(10.0, params) == pytest.approx(expected, rel=1e-14)

    def test_matches_average_of_conditional(self, params):
        """Averaging the conditional probability over interferer draws recovers mu(d)."""
        rng = np.random.default_rng(21)
        y = (5.0, 0.0)
        values = [
            succ_prob_broadcast_conditional(y, sample_interferer_process(0.01, 200.0, rng), params)
            for _ in range(4000)
        ]

        assert np.mean(values) == pytest.approx(succ_prob_spatial_average(5.0, params), rel=0.03)

    def test_negative_distance(self, params):
        with pytest.raises(ValueError):
            succ_prob_spatial_average(-1.0, params)


class TestConditional:
    """Test conditional success probabilities."""

    def test_no_interferers_is_p(self, params):
        assert succ_prob_broadcast_conditional((3.0, 0.0), np.zeros((0, 2)), params) == params.p

    def test_each_interferer_lowers_success(self, params):
        y = (2.0, 1.0)
        one = succ_prob_broadcast_conditional(y, [(6.0, 0.0)], params)
        two = succ_prob_broadcast_conditional(y, [(6.0, 0.0), (-4.0, 3.0)], params)

        assert 0.0 < two < one < params.p

    def test_factor_forms(self, params):
        """One interferer: both forms written out by hand."""
        y, x = (2.0, 0.0), (5.0, 4.0)
        g = 2.0**-4
        ell = math.hypot(3.0, 4.0) ** -4
        rayleigh = 0.2 * (1 - 0.2 + 0.2 / (1 + 5.0 * ell / g))
        printed = 0.2 * (1 - 0.2 / (1 + 5.0 * g / ell))

        assert succ_prob_broadcast_conditional(y, [x], params, RAYLEIGH) == pytest.approx(rayleigh)
        assert succ_prob_broadcast_conditional(y, [x], params, PRINTED) == pytest.approx(printed)

    def test_unknown_form(self, params):
        with pytest.raises(ValueError, match="factor form"):
            succ_prob_broadcast_conditional((1.0, 0.0), [(3.0, 0.0)], params, "nakagami")

    def test_interferer_on_receiver_is_singular(self, params):
        with pytest.raises(SingularityError):
            succ_prob_broadcast_conditional((1.0, 0.0), [(1.0, 0.0)], params)

    def test_log_space_product_matches_direct(self, params):
        rng = np.random.default_rng(8)
        interferers = sample_interferer_process(0.01, 80.0, rng)
        interferers = interferers[np.hypot(interferers[:, 0], interferers[:, 1]) > 5.0]
        assert len(interferers) > LOG_SPACE_THRESHOLD
        y = np.array([1.5, -2.0])
        g = np.hypot(*y) ** -4
        ell = np.hypot(interferers[:, 0] - y[0], interferers[:, 1] - y[1]) ** -4
        direct = 0.2 * np.prod(1 - 0.2 + 0.2 / (1 + 5.0 * ell / g))

        assert succ_prob_broadcast_conditional(y, interferers, params) == pytest.approx(
            direct, rel=1e-12
        )

    def test_collection_alone_is_p(self, params):
        assert succ_prob_collection_conditional((4.0, 3.0), np.zeros((0, 2)), params) == 0.2

    def test_collection_semi_without_co_nodes_is_mu(self, params):
        assert succ_prob_collection_semi((3.0, 4.0), [], params) == pytest.approx(
            succ_prob_spatial_average(5.0, params)
        )

    def test_collection_semi_co_node_factor(self, params):
        y, z = (3.0, 4.0), (1.0, 0.0)
        factor = 1 - 0.2 + 0.2 / (1 + 5.0 * 1.0 / 5.0**-4)

        assert succ_prob_collection_semi(y, [z], params) == pytest.approx(
            succ_prob_spatial_average(5.0, params) * factor
        )

    def test_vectors(self, small_realization, params):
        bc = broadcast_success_probs(small_realization, params)
        col = collection_success_probs(small_realization, params)
        semi = collection_success_probs(small_realization, params, "semi")

        assert bc.shape == col.shape == semi.shape == (3,)
        assert np.all((bc > 0) & (bc < params.p))
        assert np.all((col > 0) & (col < params.p))
        assert col.sum() <= 1.0

    def test_unknown_conditioning(self, small_realization, params):
        with pytest.raises(ValueError, match="conditioning"):
            collection_success_probs(small_realization, params, "full")


class TestJointSuccess:
    """Test joint broadcast success and failure probabilities."""

    def test_table_layout(self, small_realization, params):
        table = joint_success_table(small_realization, params)
        singles = broadcast_success_probs(small_realization, params)

        assert table.shape == (8,)
        assert table[0] == 1.0
        np.testing.assert_allclose([table[1], table[2], table[4]], singles, rtol=1e-12)

    def test_table_matches_direct_subsets(self, small_realization, params):
        table = joint_success_table(small_realization, params)

        for mask in range(1, 8):
            subset = [i for i in range(3) if mask >> i & 1]
            assert table[mask] == pytest.approx(
                joint_succ_prob_broadcast(subset, small_realization, params), rel=1e-12
            )

    def test_receivers_positively_correlated(self, small_realization, params):
        table = joint_success_table(small_realization, params)

        assert table[0b011] >= table[0b001] * table[0b010]
        assert table[0b111] <= min(table[0b011], table[0b110], table[0b101])

    def test_no_interferers(self, params):
        rz = Realization(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros((0, 2)), 5.0, 10.0)

        np.testing.assert_array_equal(joint_success_table(rz, params), [1.0, 0.2, 0.2, 0.2])
        assert joint_fail_prob_broadcast([0, 1], rz, params) == pytest.approx(0.8)

    def test_empty_realization(self, params):
        rz = Realization(np.zeros((0, 2)), np.zeros((0, 2)), 5.0, 10.0)

        np.testing.assert_array_equal(joint_success_table(rz, params), [1.0])

    def test_single_failure_is_complement(self, small_realization, params):
        mu = joint_succ_prob_broadcast([1], small_realization, params)

        assert joint_fail_prob_broadcast([1], small_realization, params) == pytest.approx(1 - mu)

    def test_failure_of_pair(self, small_realization, params):
        mu0 = joint_succ_prob_broadcast([0], small_realization, params)
        mu2 = joint_succ_prob_broadcast([2], small_realization, params)
        mu02 = joint_succ_prob_broadcast([0, 2], small_realization, params)

        assert joint_fail_prob_broadcast([2, 0], small_realization, params) == pytest.approx(
            1 - mu0 - mu2 + mu02
        )

    def test_subset_validation(self, small_realization, params):
        with pytest.raises(ValueError, match="nonempty"):
            joint_succ_prob_broadcast([], small_realization, params)
        with pytest.raises(ValueError, match="out of range"):
            joint_fail_prob_broadcast([3], small_realization, params)


class TestDrawSlots:
    """Test the vectorized and single-slot simulators."""

    def test_shape_and_determinism(self, small_realization, params):
        a = draw_slots(small_realization, BROADCAST, params, np.random.default_rng(1), 500)
        b = draw_slots(small_realization, BROADCAST, params, np.random.default_rng(1), 500)

        assert a.shape == (500, 3)
        assert a.dtype == bool
        np.testing.assert_array_equal(a, b)

    def test_zero_slots_or_nodes(self, params):
        empty = Realization(np.zeros((0, 2)), np.zeros((0, 2)), 5.0, 10.0)

        assert draw_slots(empty, BROADCAST, params, np.random.default_rng(0), 10).shape == (10, 0)

    def test_unknown_mode(self, small_realization, params):
        with pytest.raises(ValueError, match="mode"):
            draw_slots(small_realization, "unicast", params, np.random.default_rng(0), 1)

    def test_broadcast_without_interferers_is_all_or_nothing(self, params):
        rz = Realization(np.array([[1.0, 0.0], [0.0, 3.0]]), np.zeros((0, 2)), 5.0, 10.0)
        received = draw_slots(rz, BROADCAST, params, np.random.default_rng(3), 20000)

        np.testing.assert_array_equal(received[:, 0], received[:, 1])
        assert received[:, 0].mean() == pytest.approx(0.2, abs=0.015)

    def test_broadcast_frequencies_match_formula(self, small_realization, params):
        received = draw_slots(
            small_realization, BROADCAST, params, np.random.default_rng(5), 100_000
        )
        expected = broadcast_success_probs(small_realization, params)
        table = joint_success_table(small_realization, params)

        np.testing.assert_allclose(received.mean(axis=0), expected, atol=0.006)
        both = np.mean(received[:, 0] & received[:, 1])
        assert both == pytest.approx(table[0b011], abs=0.006)

    def test_collection_frequencies_match_formula(self, small_realization, params):
        received = draw_slots(
            small_realization, COLLECTION, params, np.random.default_rng(6), 100_000
        )
        expected = collection_success_probs(small_realization, params)

        np.testing.assert_allclose(received.mean(axis=0), expected, atol=0.006)

    def test_collection_decodes_at_most_one(self, small_realization, params):
        received = draw_slots(
            small_realization, COLLECTION, NetworkParams(p=0.9), np.random.default_rng(7), 5000
        )

        assert received.sum(axis=1).max() <= 1

    def test_collection_lone_transmitter_always_decoded(self):
        rz = Realization(np.array([[3.0, 0.0]]), np.zeros((0, 2)), 5.0, 10.0)
        received = draw_slots(rz, COLLECTION, NetworkParams(p=1.0), np.random.default_rng(0), 100)

        assert received.all()

    def test_batch_size_does_not_change_shape(self, small_realization, params):
        received = draw_slots(
            small_realization, BROADCAST, params, np.random.default_rng(2), 1000, batch_elements=7
        )

        assert received.shape == (1000, 3)

    def test_draw_slot_broadcast(self, small_realization, params):
        rng = np.random.default_rng(9)
        outcomes = [draw_slot(small_realization, BROADCAST, params, rng) for _ in range(200)]

        for slot in outcomes:
            assert isinstance(slot, SlotOutcome)
            assert slot.node_active == (False, False, False)
            if not slot.base_active:
                assert slot.success_set == []
            assert sorted(slot.success_set + slot.failure_set) == [0, 1, 2]
        assert any(slot.base_active for slot in outcomes)

    def test_draw_slot_collection(self, small_realization):
        rng = np.random.default_rng(10)
        params = NetworkParams(p=0.7)
        for _ in range(200):
            slot = draw_slot(small_realization, COLLECTION, params, rng)
            assert slot.base_active is False
            assert len(slot.success_set) <= 1
            for i in slot.success_set:
                assert slot.node_active[i]
