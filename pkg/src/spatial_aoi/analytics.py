"""Closed-form and exact expectations of the broadcast and collection ages.

Provides:
    - SubsetProbabilityTable: joint success/failure probabilities of every receiver subset
    - Delay law of the broadcast: reception_pattern_prob(), broadcast_delay_survival(),
      broadcast_delay_pmf(), exact_eaob()
    - independent_bound_eaob(): the same receivers treated as independent
    - exact_eaoc(): generalized coupon collector with disjoint receptions
    - Instance-independent bounds: aob_upper_bound(), aoc_upper_bound(),
      expected_aoc_bound()
    - max_min_identity(), harmonic(): small exact helpers used by the above

Subset sums are alternating and cancel heavily, so every one of them goes
through ``util.fsum_desc``. Subset enumeration is exponential in the node
count and guarded by caps (12 for broadcast tables, 20 for collection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import digamma
from scipy.stats import poisson

from .channel import (
    RAYLEIGH,
    NetworkParams,
    broadcast_success_probs,
    check_factor_form,
    collection_success_probs,
    joint_success_table,
    succ_prob_spatial_average,
)
from .geometry import Realization
from .util import LOG, fsum_desc

BROADCAST_NODE_CAP = 12
COLLECTION_NODE_CAP = 20
DEFAULT_TAIL_TOL = 1e-9
DEFAULT_EPSILON = 1.0

_HARMONIC_DIRECT_LIMIT = 10**6


class CapacityError(ValueError):
    """Node count exceeds the subset-enumeration cap."""

    def __init__(self, what: str, node_count: int, cap: int):
        super().__init__(
            f"{what}: {node_count} node(s) exceed the subset-enumeration cap of {cap}"
        )
        self.node_count = node_count
        self.cap = cap


class ProbabilityMassError(ValueError):
    """Per-node decoding probabilities of one slot add up to more than 1.

    The collector expectation assumes at most one node is decoded per slot.
    The printed factor form breaks that for dense clusters near the base station.
    """

    def __init__(self, total: float):
        super().__init__(
            f"collection probabilities sum to {total:.6g} > 1; "
            "the collector expectation needs at most one success per slot"
        )
        self.total = total


def _check_cap(what: str, node_count: int, cap: int) -> None:
    if node_count > cap:
        LOG.warning("%s skipped: %d node(s) > cap %d", what, node_count, cap)
        raise CapacityError(what, node_count, cap)


def _popcount_parity(n: int) -> np.ndarray:
    """Boolean array over masks 0..2**n-1, True where the mask has odd size."""
    odd = np.zeros(1, dtype=bool)
    for _ in range(n):
        odd = np.concatenate((odd, ~odd))
    return odd


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """Sum of ``values`` over every subset, indexed by bitmask."""
    sums = np.zeros(1)
    for v in values:
        sums = np.concatenate((sums, sums + v))
    return sums


def _submasks(mask: int) -> Iterable[int]:
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


@dataclass(frozen=True, eq=False)
class SubsetProbabilityTable:
    """Joint reception probabilities of a broadcast, by receiver subset.

    Arrays are indexed by bitmask (bit i set when node i belongs to the
    subset). Entry 0 is the empty subset: success 1, failure 1.

    Attributes:
        node_count: Number of receivers n
        joint_success: mu_S, probability that every receiver of S decodes the slot
        joint_failure: w_J, probability that every receiver of J misses the slot
        any_success: 1 - w_J, accumulated without the leading 1 so that
            small values keep their relative precision
    """

    node_count: int
    joint_success: np.ndarray = field(repr=False)
    joint_failure: np.ndarray = field(repr=False)
    any_success: np.ndarray = field(repr=False)

    @classmethod
    def from_success(cls, joint_success: np.ndarray) -> "SubsetProbabilityTable":
        """Build the failure side by inclusion-exclusion over sub-subsets."""
        success = np.asarray(joint_success, dtype=float)
        size = success.shape[0]
        n = size.bit_length() - 1
        if size != 1 << n:
            raise ValueError(f"table length must be a power of two, got {size}")
        odd = _popcount_parity(n)
        any_success = np.zeros(size)
        for mask in range(1, size):
            subs = list(_submasks(mask))
            terms = np.where(odd[subs], success[subs], -success[subs])
            any_success[mask] = fsum_desc(terms)
        failure = 1.0 - any_success
        return cls(n, success, failure, any_success)

    def mask_of(self, subset: Iterable[int]) -> int:
        mask = 0
        for i in subset:
            if not 0 <= int(i) < self.node_count:
                raise ValueError(f"node index {i} out of range for {self.node_count} node(s)")
            mask |= 1 << int(i)
        return mask

    def success(self, subset: Iterable[int]) -> float:
        return float(self.joint_success[self.mask_of(subset)])

    def failure(self, subset: Iterable[int]) -> float:
        return float(self.joint_failure[self.mask_of(subset)])

    def singletons(self) -> np.ndarray:
        """Per-node success probabilities mu_i."""
        return np.array([self.joint_success[1 << i] for i in range(self.node_count)])


def subset_probability_table(
    realization: Realization, params: NetworkParams, node_cap: int = BROADCAST_NODE_CAP
) -> SubsetProbabilityTable:
    """Joint broadcast success/failure table of a realization.

    Raises:
        CapacityError: More than ``node_cap`` nodes
    """
    _check_cap("subset table", realization.node_count, node_cap)
    return SubsetProbabilityTable.from_success(joint_success_table(realization, params))


def reception_pattern_prob(table: SubsetProbabilityTable, received: Iterable[int]) -> float:
    """Probability that exactly the nodes in ``received`` decode a given slot.

    ``sum over L subset of the complement of (-1)**|L| * mu(received + L)``.
    """
    xi = table.mask_of(received)
    psi = ((1 << table.node_count) - 1) & ~xi
    odd = _popcount_parity(table.node_count)
    terms = [table.joint_success[xi]]
    for sub in _submasks(psi):
        value = table.joint_success[xi | sub]
        terms.append(-value if odd[sub] else value)
    return fsum_desc(terms)


def _signed_failures(table: SubsetProbabilityTable) -> tuple[np.ndarray, np.ndarray]:
    odd = _popcount_parity(table.node_count)[1:]
    signs = np.where(odd, 1.0, -1.0)
    return signs, table.joint_failure[1:]


def broadcast_delay_survival(table: SubsetProbabilityTable, k: int) -> float:
    """P(D > k): some receiver still waits after k slots.

    ``sum over nonempty J of (-1)**(|J|+1) * w_J**k``; equals 1 at k = 0.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if table.node_count == 0:
        return 0.0
    signs, w = _signed_failures(table)
    return fsum_desc(signs * np.power(w, k))


def broadcast_delay_pmf(table: SubsetProbabilityTable, k: int) -> float:
    """P(D = k) for k >= 1."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if table.node_count == 0:
        return 0.0
    signs, w = _signed_failures(table)
    return fsum_desc(signs * np.power(w, k - 1) * table.any_success[1:])


def delay_truncation_point(node_count: int, mu_min: float, tail_tol: float) -> int:
    """Smallest K (up to bisection) with ``n * q**K * (1/(1-q) + K) < tail_tol``, q = 1 - mu_min.

    The left side bounds the part of ``sum k * P(D = k)`` beyond K, since
    ``P(D > k) <= n * q**k``.
    """
    if not 0.0 < mu_min <= 1.0:
        raise ValueError(f"mu_min must lie in (0, 1], got {mu_min}")
    if not tail_tol > 0:
        raise ValueError(f"tail_tol must be > 0, got {tail_tol}")
    q = 1.0 - mu_min
    if q == 0.0:
        return 1
    log_q = math.log(q)
    log_tol = math.log(tail_tol)

    def ok(k: int) -> bool:
        return math.log(node_count) + k * log_q + math.log(1.0 / mu_min + k) < log_tol

    hi = max(1, math.ceil((log_tol - math.log(node_count / mu_min)) / log_q))
    while not ok(hi):
        hi *= 2
    lo = max(1, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


def exact_eaob(
    realization: Realization,
    params: NetworkParams,
    tail_tol: float = DEFAULT_TAIL_TOL,
    node_cap: int = BROADCAST_NODE_CAP,
    table: Optional[SubsetProbabilityTable] = None,
) -> float:
    """Expected age of broadcast of a fixed realization.

    Equals the mean broadcast delay ``sum k * P(D = k)``. Because slots are
    i.i.d., ``P(D > k)`` is a signed sum of powers ``w_J**k`` and the sum up
    to K has a closed form per subset::

        s_J * ((1 - w_J**K) / (1 - w_J) - K * w_J**K)

    K is chosen so that the neglected tail is below ``tail_tol``.

    Raises:
        CapacityError: More than ``node_cap`` nodes
    """
    n = realization.node_count
    if n == 0:
        return 0.0
    if table is None:
        table = subset_probability_table(realization, params, node_cap)
    return eaob_from_table(table, tail_tol)


def eaob_from_table(table: SubsetProbabilityTable, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """``exact_eaob`` on an already built table."""
    if table.node_count == 0:
        return 0.0
    mu_min = float(table.singletons().min())
    if mu_min <= 0.0:
        LOG.warning("A receiver never decodes (mu = 0): expected age is infinite")
        return math.inf
    k_max = delay_truncation_point(table.node_count, mu_min, tail_tol)
    signs, w = _signed_failures(table)
    w_pow = np.power(w, k_max)
    terms = signs * ((1.0 - w_pow) / table.any_success[1:] - k_max * w_pow)
    LOG.debug("EAoB: n=%d mu_min=%.6g truncation K=%d", table.node_count, mu_min, k_max)
    return fsum_desc(terms)


def independent_geometric_max_mean(
    mus: Sequence[float], node_cap: int = COLLECTION_NODE_CAP
) -> float:
    """Mean of the maximum of independent geometrics with success probabilities ``mus``.

    The minimum over a subset A is geometric with parameter
    ``1 - prod_{i in A} (1 - mu_i)``; the max-minimums identity combines them.
    """
    arr = np.asarray(mus, dtype=float)
    _check_cap("independent bound", arr.size, node_cap)
    if arr.size == 0:
        return 0.0
    if np.any(arr <= 0.0):
        return math.inf
    log_miss = _subset_sums(np.log1p(-arr))
    hit = -np.expm1(log_miss[1:])
    odd = _popcount_parity(arr.size)[1:]
    return fsum_desc(np.where(odd, 1.0, -1.0) / hit)


def independent_bound_eaob(
    realization: Realization,
    params: NetworkParams,
    form: str = RAYLEIGH,
    node_cap: int = COLLECTION_NODE_CAP,
) -> float:
    """Age of broadcast if every receiver decoded independently of the others.

    Receivers of one broadcast share the access draws of the base station
    and interferers, so their successes are positively correlated; this
    independent version is an upper comparator for ``exact_eaob``.
    """
    if realization.node_count == 0:
        return 0.0
    _check_cap("independent bound", realization.node_count, node_cap)
    mus = broadcast_success_probs(realization, params, form)
    return independent_geometric_max_mean(mus, node_cap)


def collector_expectation(mus: Sequence[float], node_cap: int = COLLECTION_NODE_CAP) -> float:
    """Expected draws until every coupon is seen, coupon i appearing with probability mu_i.

    At most one coupon per draw (the remainder is a null draw):
    ``sum over nonempty A of (-1)**(|A|+1) / sum_{u in A} mu_u``.

    Example:
        >>> round(collector_expectation([0.5, 0.25]), 4)
        4.6667
    """
    arr = np.asarray(mus, dtype=float)
    _check_cap("collector expectation", arr.size, node_cap)
    if arr.size == 0:
        return 0.0
    if np.any(arr < 0.0):
        raise ValueError("collection probabilities must be >= 0")
    total = float(arr.sum())
    if total > 1.0 + 1e-12:
        LOG.warning("Collection probabilities sum to %.6g > 1", total)
        raise ProbabilityMassError(total)
    if np.any(arr == 0.0):
        LOG.warning("A transmitter is never decoded (mu = 0): expected age is infinite")
        return math.inf
    sums = _subset_sums(arr)[1:]
    odd = _popcount_parity(arr.size)[1:]
    return fsum_desc(np.where(odd, 1.0, -1.0) / sums)


def collection_success_vector(
    realization: Realization,
    params: NetworkParams,
    conditioning: str = "conditional",
    form: str = RAYLEIGH,
) -> np.ndarray:
    """Per-node collection success probabilities used by ``exact_eaoc``."""
    return collection_success_probs(realization, params, conditioning, form)


def exact_eaoc(
    realization: Realization,
    params: NetworkParams,
    conditioning: str = "conditional",
    form: str = RAYLEIGH,
    node_cap: int = COLLECTION_NODE_CAP,
) -> float:
    """Expected age of collection of a fixed realization.

    With theta > 1 at most one transmitter is decoded per slot, so collection
    is a coupon collector with unequal probabilities and a null coupon.

    Raises:
        CapacityError: More than ``node_cap`` nodes
        ProbabilityMassError: The per-node probabilities sum to more than 1,
            which the printed form can give for tight clusters
    """
    if realization.node_count == 0:
        return 0.0
    _check_cap("exact EAoC", realization.node_count, node_cap)
    mus = collection_success_vector(realization, params, conditioning, form)
    return collector_expectation(mus, node_cap)


def max_min_identity(values: Iterable[float]) -> float:
    """Alternating sum of subset minima, which equals ``max(values)``.

    Integers are summed exactly.

    Example:
        >>> max_min_identity([2, 5, 7])
        7
    """
    vals = list(values)
    if not vals:
        raise ValueError("max_min_identity needs at least one value")
    _check_cap("max-min identity", len(vals), COLLECTION_NODE_CAP)
    terms = []
    for size in range(1, len(vals) + 1):
        sign = 1 if size % 2 else -1
        terms.extend(sign * min(combo) for combo in combinations(vals, size))
    if all(isinstance(v, (int, np.integer)) for v in vals):
        return sum(int(t) for t in terms)
    return fsum_desc(terms)


def harmonic(n: int) -> float:
    """n-th harmonic number; exact summation up to 10**6, digamma beyond."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n <= _HARMONIC_DIRECT_LIMIT:
        return math.fsum(1.0 / k for k in range(1, n + 1))
    return float(digamma(n + 1) + np.euler_gamma)


def aob_upper_bound(r: float, params: NetworkParams) -> float:
    """Instance-independent upper bound on the expected age of broadcast at radius r.

    Adding the disk annulus [s, s + ds] adds at most its mean node count
    ``2*pi*lam*s*ds`` times the mean delay ``1/mu(s)`` of a node at its edge;
    integrating from 0 gives ``(1/(p**2 C)) * (exp(p lam pi C r**2) - 1)``
    (scaled by lam_nodes / lam_interferers when the intensities differ).
    """
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    if r == 0 or params.lam == 0:
        return 0.0
    p, c = params.p, params.C
    lam_i = params.interferer_lam
    if lam_i == 0:
        return params.lam * math.pi * r * r / p
    return (params.lam / lam_i) * math.expm1(p * lam_i * math.pi * c * r * r) / (p * p * c)


def _co_node_factor(r: float, epsilon: float, params: NetworkParams, form: str) -> float:
    check_factor_form(form)
    if form == RAYLEIGH:
        return 1.0 - params.p + params.p / (1.0 + params.theta * (r / epsilon) ** params.beta)
    return 1.0 - params.p / (1.0 + params.theta * (epsilon / r) ** params.beta)


def _check_epsilon(r: float, epsilon: float) -> None:
    if not 0.0 < epsilon < r:
        raise ValueError(f"epsilon must satisfy 0 < epsilon < r, got epsilon={epsilon}, r={r}")


def aoc_upper_bound(
    n: int,
    r: float,
    epsilon: float,
    params: NetworkParams,
    form: str = RAYLEIGH,
) -> float:
    """Upper bound on the expected age of collection given n nodes in the disk.

    The worst-placed transmitter sits at the disk edge with every co-node
    at distance epsilon from the base station; its success probability
    ``mu_bar = factor**(n-1) * mu(r)`` lower-bounds every node's, so the
    collector bound is ``H_n / mu_bar``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _check_epsilon(r, epsilon)
    factor = _co_node_factor(r, epsilon, params, form)
    mu_bar = factor ** (n - 1) * succ_prob_spatial_average(r, params)
    return harmonic(n) / mu_bar


def expected_aoc_bound(
    r: float,
    params: NetworkParams,
    epsilon: float = DEFAULT_EPSILON,
    form: str = RAYLEIGH,
    tol: float = 1e-12,
) -> float:
    """``aoc_upper_bound`` averaged over a Poisson(lam * pi * r**2) node count (0 for no nodes)."""
    _check_epsilon(r, epsilon)
    mean = params.lam * math.pi * r * r
    if mean == 0.0:
        return 0.0
    n_max = max(1, int(poisson.isf(tol, mean)) + 1)
    counts = np.arange(1, n_max + 1)
    weights = poisson.pmf(counts, mean)
    factor = _co_node_factor(r, epsilon, params, form)
    mu_r = succ_prob_spatial_average(r, params)
    harmonics = np.cumsum(1.0 / counts)
    bounds = harmonics / (factor ** (counts - 1) * mu_r)
    return fsum_desc(weights * bounds)


@dataclass(frozen=True)
class AnalyticsConfig:
    """Settings of the closed-form evaluations.

    Attributes:
        tail_tol: Truncation tolerance of the broadcast delay sum
        broadcast_node_cap: Largest node count for exact_eaob
        collection_node_cap: Largest node count for exact_eaoc / independent bound
        epsilon: Co-node distance of the collection bound (0 < epsilon < r)
        factor_form: "rayleigh" or "printed" per-interferer factor
        collection_mu: "conditional" or "semi" per-node collection probabilities
    """

    tail_tol: float = DEFAULT_TAIL_TOL
    broadcast_node_cap: int = BROADCAST_NODE_CAP
    collection_node_cap: int = COLLECTION_NODE_CAP
    epsilon: float = DEFAULT_EPSILON
    factor_form: str = RAYLEIGH
    collection_mu: str = "conditional"

    def __post_init__(self) -> None:
        if not 0.0 < self.tail_tol < 1.0:
            raise ValueError(f"tail_tol must satisfy 0 < tail_tol < 1, got {self.tail_tol}")
        if self.broadcast_node_cap < 1:
            raise ValueError(f"broadcast_node_cap must be >= 1, got {self.broadcast_node_cap}")
        if self.collection_node_cap < 1:
            raise ValueError(f"collection_node_cap must be >= 1, got {self.collection_node_cap}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0 (co-node distance), got {self.epsilon}")
        check_factor_form(self.factor_form)
        if self.collection_mu not in ("conditional", "semi"):
            raise ValueError(
                f"collection_mu must be 'conditional' or 'semi', got {self.collection_mu!r}"
            )
