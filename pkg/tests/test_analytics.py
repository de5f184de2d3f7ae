"""Unit tests for analytics.py module.

Exact expectations are checked against absorbing Markov chains solved with
scipy, and the bounds against their closed forms.
"""

import math
from itertools import product

import numpy as np
import pytest
from scipy import linalg
from scipy.stats import poisson

from spatial_aoi.analytics import (
    AnalyticsConfig,
    CapacityError,
    ProbabilityMassError,
    SubsetProbabilityTable,
    aob_upper_bound,
    aoc_upper_bound,
    broadcast_delay_pmf,
    broadcast_delay_survival,
    collector_expectation,
    delay_truncation_point,
    eaob_from_table,
    exact_eaoc,
    exact_eaob,
    expected_aoc_bound,
    harmonic,
    independent_bound_eaob,
    independent_geometric_max_mean,
    max_min_identity,
    reception_pattern_prob,
    subset_probability_table,
)
from spatial_aoi.channel import (
    PRINTED,
    NetworkParams,
    broadcast_success_probs,
    collection_success_probs,
    joint_success_table,
    succ_prob_spatial_average,
)
from spatial_aoi.geometry import Realization


@pytest.fixture
def five_nodes():
    nodes = np.array([[1.0, 1.0], [-2.5, 0.5], [0.3, -3.2], [3.0, -1.0], [-1.0, -2.0]])
    interferers = np.array([[7.0, 2.0], [-6.0, 5.0], [1.0, -9.0], [12.0, 12.0], [-3.0, 8.5]])
    return Realization(nodes, interferers, 4.0, 25.0)


def _exact_pattern(success, waiting, received):
    """P(exactly ``received`` of the ``waiting`` receivers decode one slot)."""
    others = waiting & ~received
    total = 0.0
    sub = others
    while True:
        sign = -1.0 if bin(sub).count("1") % 2 else 1.0
        total += sign * success[received | sub]
        if sub == 0:
            break
        sub = (sub - 1) & others
    return total


def _broadcast_chain_mean(success, n):
    """Mean absorption time of the chain on 'still waiting' subsets."""
    size = 1 << n
    a = np.eye(size - 1)
    b = np.ones(size - 1)
    for waiting in range(1, size):
        for received in range(size):
            if received & ~waiting:
                continue
            nxt = waiting & ~received
            if nxt:
                a[waiting - 1, nxt - 1] -= _exact_pattern(success, waiting, received)
    return linalg.solve(a, b)[size - 2]


def _collection_chain_mean(mus):
    n = len(mus)
    expected = {0: 0.0}
    for waiting in range(1, 1 << n):
        members = [i for i in range(n) if waiting >> i & 1]
        rate = sum(mus[i] for i in members)
        inflow = sum(mus[i] * expected[waiting & ~(1 << i)] for i in members)
        expected[waiting] = (1 + inflow) / rate
    return expected[(1 << n) - 1]


class TestSubsetTable:
    """Test SubsetProbabilityTable and reception_pattern_prob()."""

    def test_failure_side(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        assert table.node_count == 3
        assert table.joint_failure[0] == 1.0
        np.testing.assert_allclose(table.joint_failure + table.any_success, 1.0)
        assert table.failure([0]) == pytest.approx(1 - table.success([0]))

    def test_singletons(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        np.testing.assert_allclose(
            table.singletons(), broadcast_success_probs(small_realization, params), rtol=1e-12
        )

    def test_patterns_form_a_distribution(self, five_nodes, params):
        table = subset_probability_table(five_nodes, params)
        probs = [
            reception_pattern_prob(table, [i for i in range(5) if bits[i]])
            for bits in product([0, 1], repeat=5)
        ]

        assert min(probs) >= -1e-15
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)

    def test_nobody_pattern_is_total_failure(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        assert reception_pattern_prob(table, []) == pytest.approx(table.joint_failure[7])

    def test_everybody_pattern_is_joint_success(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        assert reception_pattern_prob(table, [0, 1, 2]) == table.joint_success[7]

    def test_length_must_be_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            SubsetProbabilityTable.from_success(np.ones(6))

    def test_index_out_of_range(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        with pytest.raises(ValueError, match="out of range"):
            table.success([3])

    def test_capacity(self, params):
        nodes = np.column_stack((np.linspace(0.5, 3.5, 13), np.zeros(13)))
        rz = Realization(nodes, np.zeros((0, 2)), 4.0, 8.0)

        with pytest.raises(CapacityError) as exc:
            subset_probability_table(rz, params)
        assert exc.value.node_count == 13
        assert exc.value.cap == 12


class TestBroadcastDelay:
    """Test the broadcast delay law and exact_eaob()."""

    def test_survival_and_pmf(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        assert broadcast_delay_survival(table, 0) == pytest.approx(1.0)
        for k in range(1, 30):
            pmf = broadcast_delay_pmf(table, k)
            assert pmf >= 0
            assert pmf == pytest.approx(
                broadcast_delay_survival(table, k - 1) - broadcast_delay_survival(table, k),
                abs=1e-14,
            )

    def test_pmf_sums_to_one(self, small_realization, params):
        table = subset_probability_table(small_realization, params)
        total = math.fsum(broadcast_delay_pmf(table, k) for k in range(1, 2000))

        assert total == pytest.approx(1.0, abs=1e-9)

    def test_mean_is_sum_of_survival(self, small_realization, params):
        table = subset_probability_table(small_realization, params)
        survival_sum = math.fsum(broadcast_delay_survival(table, k) for k in range(0, 3000))

        assert exact_eaob(small_realization, params, table=table) == pytest.approx(
            survival_sum, rel=1e-8
        )

    @pytest.mark.parametrize("fixture_name", ["small_realization", "five_nodes"])
    def test_matches_markov_chain(self, request, fixture_name, params):
        rz = request.getfixturevalue(fixture_name)
        oracle = _broadcast_chain_mean(joint_success_table(rz, params), rz.node_count)

        assert exact_eaob(rz, params) == pytest.approx(oracle, rel=1e-8)

    def test_without_interferers_is_one_over_p(self, params):
        nodes = np.array([[1.0, 0.0], [0.0, 2.0], [-3.0, -1.0], [2.0, 2.0]])
        rz = Realization(nodes, np.zeros((0, 2)), 10.0, 20.0)

        assert exact_eaob(rz, params) == pytest.approx(1.0 / params.p, rel=1e-9)

    def test_single_node_is_one_over_mu(self, params):
        rz = Realization(np.array([[2.0, 1.0]]), np.array([[5.0, 5.0], [-4.0, 0.0]]), 3.0, 10.0)
        mu = broadcast_success_probs(rz, params)[0]

        assert exact_eaob(rz, params) == pytest.approx(1.0 / mu, rel=1e-9)

    def test_no_nodes(self, params):
        rz = Realization(np.zeros((0, 2)), np.array([[1.0, 1.0]]), 3.0, 10.0)

        assert exact_eaob(rz, params) == 0.0

    def test_correlation_helps(self, five_nodes, params):
        """Shared access draws make the exact value at most the independent one."""
        exact = exact_eaob(five_nodes, params)
        indep = independent_bound_eaob(five_nodes, params)

        assert exact <= indep
        assert exact >= max(1.0 / m for m in broadcast_success_probs(five_nodes, params))

    def test_from_table_matches(self, small_realization, params):
        table = subset_probability_table(small_realization, params)

        assert eaob_from_table(table) == exact_eaob(small_realization, params)

    def test_truncation_point(self):
        k = delay_truncation_point(4, 0.05, 1e-9)

        def bound(j):
            return 4 * 0.95**j * (1 / 0.05 + j)

        assert bound(k) < 1e-9
        assert bound(k - 1) >= 1e-9
        assert delay_truncation_point(3, 1.0, 1e-9) == 1

    def test_truncation_point_validation(self):
        with pytest.raises(ValueError):
            delay_truncation_point(2, 0.0, 1e-9)
        with pytest.raises(ValueError):
            delay_truncation_point(2, 0.5, 0.0)


class TestIndependentAndCollector:
    """Test the independent-receiver and coupon collector expectations."""

    def test_two_fair_geometrics(self):
        assert independent_geometric_max_mean([0.5, 0.5]) == pytest.approx(8.0 / 3.0)

    def test_single_geometric(self):
        assert independent_geometric_max_mean([0.2]) == pytest.approx(5.0)

    def test_geometric_max_by_simulation(self):
        rng = np.random.default_rng(12)
        mus = [0.3, 0.1, 0.45]
        draws = np.max([rng.geometric(m, 200_000) for m in mus], axis=0)

        assert independent_geometric_max_mean(mus) == pytest.approx(draws.mean(), rel=0.01)

    def test_uniform_collector(self):
        assert collector_expectation([1 / 3, 1 / 3, 1 / 3]) == pytest.approx(5.5, rel=1e-12)

    def test_unequal_collector(self):
        assert collector_expectation([0.5, 0.25]) == pytest.approx(2 + 4 - 1 / 0.75)

    def test_collector_matches_chain(self):
        mus = [0.05, 0.12, 0.2, 0.08, 0.3, 0.01]

        assert collector_expectation(mus) == pytest.approx(
            _collection_chain_mean(mus), rel=1e-10
        )

    def test_collector_probabilities_must_fit(self):
        with pytest.raises(ProbabilityMassError, match="sum to 1.2 > 1"):
            collector_expectation([0.6, 0.6])
        with pytest.raises(ValueError, match=">= 0"):
            collector_expectation([0.5, -0.1])

    def test_never_decoded_is_infinite(self):
        assert collector_expectation([0.2, 0.0]) == math.inf
        assert independent_geometric_max_mean([0.2, 0.0]) == math.inf

    def test_empty(self):
        assert collector_expectation([]) == 0.0
        assert independent_geometric_max_mean([]) == 0.0

    def test_collector_capacity(self):
        with pytest.raises(CapacityError):
            collector_expectation([0.01] * 21)

    def test_exact_eaoc_single_node(self, params):
        rz = Realization(np.array([[2.0, 1.0]]), np.array([[5.0, 5.0]]), 3.0, 10.0)
        mu = collection_success_probs(rz, params)[0]

        assert exact_eaoc(rz, params) == pytest.approx(1.0 / mu)

    def test_exact_eaoc_matches_chain(self, five_nodes, params):
        mus = collection_success_probs(five_nodes, params)

        assert exact_eaoc(five_nodes, params) == pytest.approx(
            _collection_chain_mean(list(mus)), rel=1e-10
        )

    def test_exact_eaoc_semi(self, five_nodes, params):
        semi = exact_eaoc(five_nodes, params, conditioning="semi")
        mus = collection_success_probs(five_nodes, params, "semi")

        assert semi == pytest.approx(collector_expectation(mus))

    def test_collection_ages_exceed_broadcast(self, five_nodes, params):
        assert exact_eaoc(five_nodes, params) > exact_eaob(five_nodes, params)

    def test_printed_form_overfull_cluster(self, params):
        angles = np.linspace(0.0, 2 * np.pi, 10, endpoint=False)
        ring = np.column_stack((3.0 * np.cos(angles), 3.0 * np.sin(angles)))
        rz = Realization(ring, [], 10.0, 10.0)

        assert collection_success_probs(rz, params, form=PRINTED).sum() > 1.0
        with pytest.raises(ProbabilityMassError) as exc:
            exact_eaoc(rz, params, form=PRINTED)
        assert exc.value.total > 1.0
        assert exact_eaoc(rz, params) > 0.0


class TestSmallHelpers:
    """Test max_min_identity() and harmonic()."""

    def test_max_min_integers_exact(self):
        result = max_min_identity([2, 5, 7])

        assert result == 7
        assert isinstance(result, int)

    def test_max_min_floats(self):
        values = np.random.default_rng(0).random(10)

        assert max_min_identity(values) == pytest.approx(values.max(), abs=1e-12)

    def test_max_min_empty(self):
        with pytest.raises(ValueError):
            max_min_identity([])

    def test_harmonic(self):
        assert harmonic(0) == 0.0
        assert harmonic(1) == 1.0
        assert harmonic(4) == pytest.approx(25 / 12)

    def test_harmonic_large_branch_continuous(self):
        n = 10**6
        assert harmonic(n + 1) == pytest.approx(harmonic(n) + 1 / (n + 1), rel=1e-12)


class TestBounds:
    """Test the instance-independent bounds."""

    def test_aob_bound_at_defaults(self, params):
        assert aob_upper_bound(10.0, params) == pytest.approx(57.5, abs=0.2)

    def test_aob_bound_closed_form(self, params):
        c = params.C
        expected = math.expm1(0.2 * 0.01 * math.pi * c * 36) / (0.04 * c)

        assert aob_upper_bound(6.0, params) == pytest.approx(expected, rel=1e-14)

    def test_aob_bound_grows_super_exponentially(self, params):
        values = [aob_upper_bound(r, params) for r in (10.0, 12.0, 14.0)]

        assert values[1] / values[0] < values[2] / values[1]

    def test_aob_bound_degenerate(self, params):
        assert aob_upper_bound(0.0, params) == 0.0
        no_interference = NetworkParams(interferer_lambda=0.0)
        assert aob_upper_bound(10.0, no_interference) == pytest.approx(0.01 * math.pi * 100 / 0.2)

    def test_aoc_bound_single_node(self, params):
        assert aoc_upper_bound(1, 10.0, 1.0, params) == pytest.approx(
            1.0 / succ_prob_spatial_average(10.0, params)
        )

    def test_aoc_bound_formula(self, params):
        factor = 1 - 0.2 + 0.2 / (1 + 5.0 * (8.0 / 0.5) ** 4)
        expected = (1 + 1 / 2 + 1 / 3) / (factor**2 * succ_prob_spatial_average(8.0, params))

        assert aoc_upper_bound(3, 8.0, 0.5, params) == pytest.approx(expected)

    def test_aoc_bound_printed_form(self, params):
        factor = 1 - 0.2 / (1 + 5.0 * (0.5 / 8.0) ** 4)
        expected = 1.5 / (factor * succ_prob_spatial_average(8.0, params))

        assert aoc_upper_bound(2, 8.0, 0.5, params, PRINTED) == pytest.approx(expected)

    def test_aoc_bound_increasing_in_n(self, params):
        values = [aoc_upper_bound(n, 6.0, 1.0, params) for n in range(1, 8)]

        assert all(b > a for a, b in zip(values, values[1:]))

    def test_aoc_bound_epsilon_range(self, params):
        with pytest.raises(ValueError, match="epsilon"):
            aoc_upper_bound(2, 5.0, 5.0, params)
        with pytest.raises(ValueError, match="n must be"):
            aoc_upper_bound(0, 5.0, 1.0, params)

    def test_expected_aoc_bound_mixture(self, params):
        r = 4.0
        mean = 0.01 * math.pi * r * r
        direct = math.fsum(
            poisson.pmf(n, mean) * aoc_upper_bound(n, r, 1.0, params) for n in range(1, 60)
        )

        assert expected_aoc_bound(r, params) == pytest.approx(direct, rel=1e-10)

    def test_expected_aoc_bound_no_nodes(self):
        assert expected_aoc_bound(5.0, NetworkParams(lam=0.0, interferer_lambda=0.01)) == 0.0

    def test_bound_dominates_instances(self, params):
        """Every instance is at most the bound of its node count."""
        rng = np.random.default_rng(30)
        for _ in range(20):
            nodes = rng.uniform(-2.5, 2.5, size=(4, 2))
            nodes = nodes[np.hypot(nodes[:, 0], nodes[:, 1]) > 1.0]
            if len(nodes) == 0:
                continue
            rz = Realization(nodes, np.zeros((0, 2)), 4.0, 8.0)
            semi = exact_eaoc(rz, params, conditioning="semi")
            assert semi <= aoc_upper_bound(len(nodes), 4.0, 1.0, params)


class TestAnalyticsConfig:
    """Test AnalyticsConfig validation."""

    def test_defaults(self):
        cfg = AnalyticsConfig()

        assert cfg.tail_tol == 1e-9
        assert (cfg.broadcast_node_cap, cfg.collection_node_cap) == (12, 20)
        assert cfg.factor_form == "rayleigh"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tail_tol": 0.0},
            {"broadcast_node_cap": 0},
            {"epsilon": -1.0},
            {"factor_form": "nakagami"},
            {"collection_mu": "full"},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            AnalyticsConfig(**kwargs)
