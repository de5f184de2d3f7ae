"""SIR receptions under slotted ALOHA and Rayleigh fading.

Provides:
    - NetworkParams: physical-layer constants shared by formulas and simulation
    - path_loss(), constant_C(): the power-law attenuation and the Gamma constant
    - Success probabilities: spatially averaged, conditional on a realization
      (broadcast and collection), and the semi-conditional collection form
    - Joint success/failure probabilities of receiver subsets (broadcast)
    - draw_slots()/draw_slot(): per-slot medium access, fading and reception

Every transmitter (base station included) accesses the medium with
probability p per slot; fading powers are unit-mean exponentials drawn fresh
per link and slot. A reception succeeds when the transmitter is active and the
SIR exceeds theta; zero interference with an active transmitter is a success.

Conditional products use one factor per interferer x acting on a link of
path gain g:

    rayleigh:  1 - p + p / (1 + theta * l(x) / g)
    printed:   1 - p / (1 + theta * g / l(x))

"rayleigh" is the Laplace transform of the fading model the simulator
samples; "printed" is kept as a compatibility form and disagrees with the
simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma

from .util import fsum_desc
from .geometry import (
    DivergentInterferenceError,
    Point,
    PointsLike,
    Realization,
    SingularityError,
    as_array,
)

BROADCAST = "broadcast"
COLLECTION = "collection"
MODES = (BROADCAST, COLLECTION)

RAYLEIGH = "rayleigh"
PRINTED = "printed"
FACTOR_FORMS = (RAYLEIGH, PRINTED)

# Above this many interferers products are accumulated as sums of logs.
LOG_SPACE_THRESHOLD = 64

# Random draws per batch in draw_slots (slots x links).
DEFAULT_BATCH_ELEMENTS = 1 << 21

__all__ = [
    "BROADCAST",
    "COLLECTION",
    "DivergentInterferenceError",
    "FACTOR_FORMS",
    "MODES",
    "NetworkParams",
    "SlotOutcome",
    "broadcast_success_probs",
    "check_factor_form",
    "collection_success_probs",
    "constant_C",
    "draw_slot",
    "draw_slots",
    "joint_fail_prob_broadcast",
    "joint_succ_prob_broadcast",
    "joint_success_table",
    "path_loss",
    "succ_prob_broadcast_conditional",
    "succ_prob_collection_conditional",
    "succ_prob_collection_semi",
    "succ_prob_spatial_average",
]


@dataclass(frozen=True)
class NetworkParams:
    """Immutable physical-layer constants.

    Attributes:
        lam: Node intensity per square meter (also the interferer intensity
            unless interferer_lambda overrides it)
        theta: SIR threshold (> 1)
        p: Medium access probability of every transmitter (0 < p <= 1)
        beta: Path loss exponent (> 2)
        r: Node disk radius in meters (> 0)
        interferer_lambda: Optional separate interferer intensity (exploration
            extension; the network model uses one intensity for both)
    """

    lam: float = 0.01
    theta: float = 5.0
    p: float = 0.2
    beta: float = 4.0
    r: float = 10.0
    interferer_lambda: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("lam", "theta", "p", "beta", "r"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0 (intensity), got {self.lam}")
        if not self.theta > 1:
            raise ValueError(f"theta must be > 1 (SIR threshold), got {self.theta}")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must satisfy 0 < p <= 1 (medium access probability), got {self.p}")
        if not self.beta > 2:
            raise DivergentInterferenceError(
                f"beta must be > 2 (path loss exponent, finite interference), got {self.beta}"
            )
        if not self.r > 0:
            raise ValueError(f"r must be > 0 (node disk radius), got {self.r}")
        if self.interferer_lambda is not None and not (
            math.isfinite(self.interferer_lambda) and self.interferer_lambda >= 0
        ):
            raise ValueError(
                f"interferer_lambda must be >= 0 (intensity), got {self.interferer_lambda}"
            )

    @property
    def delta(self) -> float:
        return 2.0 / self.beta

    @property
    def interferer_lam(self) -> float:
        return self.lam if self.interferer_lambda is None else self.interferer_lambda

    @property
    def C(self) -> float:  # pylint: disable=invalid-name
        return constant_C(self.theta, self.beta)


@dataclass(frozen=True)
class SlotOutcome:
    """Medium access and reception indicators of one slot.

    Attributes:
        mode: "broadcast" or "collection"
        base_active: Base station transmitted (broadcast mode; False in collection)
        node_active: Per-node access indicators (collection mode; all False in broadcast)
        received: Per-node reception indicators; the success set is where it is True
    """

    mode: str
    base_active: bool
    node_active: Tuple[bool, ...]
    received: Tuple[bool, ...]

    @property
    def success_set(self) -> List[int]:
        return [i for i, ok in enumerate(self.received) if ok]

    @property
    def failure_set(self) -> List[int]:
        return [i for i, ok in enumerate(self.received) if not ok]


def check_factor_form(form: str) -> None:
    if form not in FACTOR_FORMS:
        raise ValueError(f"factor form must be one of {FACTOR_FORMS}, got {form!r}")


def _gain(dist: np.ndarray, beta: float) -> np.ndarray:
    if np.any(dist == 0.0):
        raise SingularityError("path loss is singular at zero distance")
    return dist ** (-beta)


def path_loss(x: Point | Sequence[float], beta: float = 4.0) -> float:
    """Path gain ``||x||**(-beta)``.

    Example:
        >>> path_loss(Point(2.0, 0.0), beta=4.0)
        0.0625

    Raises:
        SingularityError: x at the origin
    """
    dist = math.hypot(float(x[0]), float(x[1]))
    if dist == 0.0:
        raise SingularityError("path loss is singular at the origin")
    return dist ** (-beta)


def constant_C(theta: float, beta: float) -> float:  # pylint: disable=invalid-name
    """``Gamma(1 + delta) * Gamma(1 - delta) * theta**delta`` with ``delta = 2/beta``.

    Example:
        >>> round(constant_C(1.0, 4.0), 7)
        1.5707963

    Raises:
        DivergentInterferenceError: beta <= 2
        ValueError: theta <= 0
    """
    if not beta > 2:
        raise DivergentInterferenceError(f"beta must be > 2, got {beta}")
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    delta = 2.0 / beta
    return float(gamma(1.0 + delta) * gamma(1.0 - delta) * theta**delta)


def succ_prob_spatial_average(d: float, params: NetworkParams) -> float:
    """Success probability at distance ``d`` averaged over interferer placements.

    ``mu(d) = p * exp(-p * lam_I * pi * C * d**2)``; equals p at d = 0.
    """
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    exponent = params.p * params.interferer_lam * math.pi * params.C * d * d
    return params.p * math.exp(-exponent)


def _factors(
    interferer_gains: np.ndarray, signal_gain: float, params: NetworkParams, form: str
) -> np.ndarray:
    """Per-interferer product factors for a link of path gain ``signal_gain``."""
    check_factor_form(form)
    p, theta = params.p, params.theta
    if form == RAYLEIGH:
        return 1.0 - p + p / (1.0 + theta * interferer_gains / signal_gain)
    return 1.0 - p / (1.0 + theta * signal_gain / interferer_gains)


def _product(factors: np.ndarray, axis: int = -1) -> np.ndarray:
    if factors.shape[axis] > LOG_SPACE_THRESHOLD:
        return np.exp(np.sum(np.log(factors), axis=axis))
    return np.prod(factors, axis=axis)


def _conditional(
    signal_gain: float, interferer_gains: np.ndarray, params: NetworkParams, form: str
) -> float:
    check_factor_form(form)
    if interferer_gains.size == 0:
        return params.p
    return float(params.p * _product(_factors(interferer_gains, signal_gain, params, form)))


def succ_prob_broadcast_conditional(
    y: Point | Sequence[float],
    interferers: PointsLike,
    params: NetworkParams,
    form: str = RAYLEIGH,
) -> float:
    """Probability that receiver ``y`` decodes a base station broadcast.

    Conditioned on the interferer positions; averaged over medium access and
    fading. Equals p with no interferers and drops with each interferer added.

    Raises:
        SingularityError: y at the origin or an interferer on top of y
    """
    yv = np.asarray(y, dtype=float)
    signal = path_loss(yv, params.beta)
    pts = as_array(interferers)
    gains = _gain(np.hypot(pts[:, 0] - yv[0], pts[:, 1] - yv[1]), params.beta)
    return _conditional(signal, gains, params, form)


def succ_prob_collection_conditional(
    x: Point | Sequence[float],
    others: PointsLike,
    params: NetworkParams,
    form: str = RAYLEIGH,
) -> float:
    """Probability that the base station decodes transmitter ``x``.

    ``others`` holds every other potential transmitter (other nodes and the
    interferers); interference is measured at the origin.

    Raises:
        SingularityError: x or one of ``others`` at the origin
    """
    signal = path_loss(x, params.beta)
    pts = as_array(others)
    gains = _gain(np.hypot(pts[:, 0], pts[:, 1]), params.beta)
    return _conditional(signal, gains, params, form)


def succ_prob_collection_semi(
    y: Point | Sequence[float],
    co_nodes: PointsLike,
    params: NetworkParams,
    form: str = RAYLEIGH,
) -> float:
    """Collection success of ``y`` averaged over interferers, conditioned on co-nodes.

    ``mu(||y||) * prod over co_nodes of the per-node factor``.
    """
    signal = path_loss(y, params.beta)
    base = succ_prob_spatial_average(math.hypot(float(y[0]), float(y[1])), params)
    pts = as_array(co_nodes)
    if pts.shape[0] == 0:
        return base
    gains = _gain(np.hypot(pts[:, 0], pts[:, 1]), params.beta)
    return float(base * _product(_factors(gains, signal, params, form)))


def broadcast_success_probs(
    realization: Realization, params: NetworkParams, form: str = RAYLEIGH
) -> np.ndarray:
    """Per-node broadcast success probabilities of a realization."""
    return np.array(
        [
            succ_prob_broadcast_conditional(y, realization.interferers, params, form)
            for y in realization.nodes
        ]
    )


def collection_success_probs(
    realization: Realization,
    params: NetworkParams,
    conditioning: str = "conditional",
    form: str = RAYLEIGH,
) -> np.ndarray:
    """Per-node collection success probabilities of a realization.

    Args:
        conditioning: "conditional" (interferers and co-nodes known) or
            "semi" (interferers averaged out, co-nodes known)
    """
    if conditioning not in ("conditional", "semi"):
        raise ValueError(f"conditioning must be 'conditional' or 'semi', got {conditioning!r}")
    nodes = realization.nodes
    out = np.empty(len(nodes))
    for i, x in enumerate(nodes):
        co_nodes = np.delete(nodes, i, axis=0)
        if conditioning == "semi":
            out[i] = succ_prob_collection_semi(x, co_nodes, params, form)
        else:
            others = np.vstack((co_nodes, realization.interferers))
            out[i] = succ_prob_collection_conditional(x, others, params, form)
    return out


def _link_ratios(realization: Realization, params: NetworkParams) -> np.ndarray:
    """(m, n) matrix of theta * l(x - i) / l(i) for interferer x and receiver i."""
    nodes, interferers = realization.nodes, realization.interferers
    signal = _gain(np.hypot(nodes[:, 0], nodes[:, 1]), params.beta)
    dx = interferers[:, None, 0] - nodes[None, :, 0]
    dy = interferers[:, None, 1] - nodes[None, :, 1]
    gains = _gain(np.hypot(dx, dy), params.beta)
    return params.theta * gains / signal[None, :]


def joint_success_table(realization: Realization, params: NetworkParams) -> np.ndarray:
    """Joint broadcast success probability of every receiver subset.

    Entry ``mask`` (bit i set when node i is in the subset) is
    ``p * prod_x [1 - p + p * prod_{i in subset} 1/(1 + theta l(x-i)/l(i))]``:
    receivers share the access draws of the base station and interferers but
    fade independently. Entry 0 (empty subset) is 1.
    """
    n = realization.node_count
    size = 1 << n
    table = np.ones(size)
    if n == 0:
        return table
    m = realization.interferer_count
    if m == 0:
        table[1:] = params.p
        return table

    # log of prod_{i in subset} 1/(1 + ratio), built up one bit at a time
    log_keep = -np.log1p(_link_ratios(realization, params))  # (m, n)
    subset_logs = np.zeros((size, m))
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        subset_logs[mask] = subset_logs[mask & (mask - 1)] + log_keep[:, low]
    per_interferer = 1.0 - params.p + params.p * np.exp(subset_logs[1:])
    if m > LOG_SPACE_THRESHOLD:
        table[1:] = params.p * np.exp(np.sum(np.log(per_interferer), axis=1))
    else:
        table[1:] = params.p * np.prod(per_interferer, axis=1)
    return table


def _subset_mask(subset: Iterable[int], n: int) -> int:
    mask = 0
    for i in subset:
        if not 0 <= int(i) < n:
            raise ValueError(f"node index {i} out of range for {n} node(s)")
        mask |= 1 << int(i)
    if mask == 0:
        raise ValueError("subset must be nonempty")
    return mask


def _joint_success_mask(realization: Realization, mask: int, params: NetworkParams) -> float:
    members = [i for i in range(realization.node_count) if mask >> i & 1]
    if realization.interferer_count == 0:
        return params.p
    ratios = _link_ratios(realization.with_nodes(realization.nodes[members]), params)
    per_interferer = 1.0 - params.p + params.p * np.exp(-np.sum(np.log1p(ratios), axis=1))
    return float(params.p * _product(per_interferer))


def joint_succ_prob_broadcast(
    subset: Iterable[int], realization: Realization, params: NetworkParams
) -> float:
    """Probability that every receiver in ``subset`` decodes the same slot's broadcast.

    Raises:
        ValueError: Empty subset or index out of range
    """
    mask = _subset_mask(subset, realization.node_count)
    return _joint_success_mask(realization, mask, params)


def joint_fail_prob_broadcast(
    subset: Iterable[int], realization: Realization, params: NetworkParams
) -> float:
    """Probability that every receiver in ``subset`` misses the slot's broadcast.

    Inclusion-exclusion over the joint successes of its sub-subsets:
    ``w_J = sum_{S subset of J} (-1)**|S| * mu_S`` with ``mu_empty = 1``.
    """
    mask = _subset_mask(subset, realization.node_count)
    terms = [1.0]
    sub = mask
    while sub:
        sign = -1.0 if bin(sub).count("1") % 2 else 1.0
        terms.append(sign * _joint_success_mask(realization, sub, params))
        sub = (sub - 1) & mask
    return fsum_desc(terms)


def _batch_size(links: int, batch_elements: int) -> int:
    return int(max(1, min(8192, batch_elements // max(1, links))))


def draw_slots(
    realization: Realization,
    mode: str,
    params: NetworkParams,
    rng: np.random.Generator,
    count: int,
    batch_elements: int = DEFAULT_BATCH_ELEMENTS,
) -> np.ndarray:
    """Simulate ``count`` slots and return the (count, n) boolean reception matrix.

    Draws are made in batches whose size depends only on the realization and
    ``batch_elements``, so the result is a deterministic function of the
    stream state.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n = realization.node_count
    out = np.zeros((count, n), dtype=bool)
    if n == 0 or count == 0:
        return out

    nodes, interferers = realization.nodes, realization.interferers
    p, theta, beta = params.p, params.theta, params.beta
    node_gain = _gain(np.hypot(nodes[:, 0], nodes[:, 1]), beta)
    m = len(interferers)

    if mode == BROADCAST:
        if m:
            dx = interferers[None, :, 0] - nodes[:, None, 0]
            dy = interferers[None, :, 1] - nodes[:, None, 1]
            link_gain = _gain(np.hypot(dx, dy), beta)  # (n, m)
        batch = _batch_size(n * max(1, m), batch_elements)
        for start in range(0, count, batch):
            b = min(batch, count - start)
            base = rng.random(b) < p
            fading = rng.exponential(1.0, (b, n))
            signal = np.where(base[:, None], fading * node_gain[None, :], 0.0)
            if m:
                active = rng.random((b, m)) < p
                h = rng.exponential(1.0, (b, n, m))
                interference = np.einsum("bx,bix,ix->bi", active.astype(float), h, link_gain)
            else:
                interference = np.zeros((b, n))
            out[start : start + b] = base[:, None] & (
                (interference == 0.0) | (signal > theta * interference)
            )
        return out

    interferer_gain = _gain(np.hypot(interferers[:, 0], interferers[:, 1]), beta) if m else None
    batch = _batch_size(n + m, batch_elements)
    for start in range(0, count, batch):
        b = min(batch, count - start)
        node_on = rng.random((b, n)) < p
        node_power = np.where(node_on, rng.exponential(1.0, (b, n)) * node_gain[None, :], 0.0)
        if m:
            inter_on = rng.random((b, m)) < p
            inter_power = np.where(
                inter_on, rng.exponential(1.0, (b, m)) * interferer_gain[None, :], 0.0
            )
            field_power = inter_power.sum(axis=1)
        else:
            field_power = np.zeros(b)
        total = node_power.sum(axis=1) + field_power
        interference = np.maximum(total[:, None] - node_power, 0.0)
        # only the active transmitter itself: interference is exactly zero
        alone = node_on & (node_on.sum(axis=1)[:, None] == 1) & (field_power[:, None] == 0.0)
        out[start : start + b] = node_on & (alone | (node_power > theta * interference))
    return out


def draw_slot(
    realization: Realization, mode: str, params: NetworkParams, rng: np.random.Generator
) -> SlotOutcome:
    """Simulate a single slot and report its access and reception indicators."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n = realization.node_count
    nodes, interferers = realization.nodes, realization.interferers
    p, theta, beta = params.p, params.theta, params.beta
    node_gain = _gain(np.hypot(nodes[:, 0], nodes[:, 1]), beta) if n else np.zeros(0)

    if mode == BROADCAST:
        base = bool(rng.random() < p)
        received = np.zeros(n, dtype=bool)
        if n:
            signal = rng.exponential(1.0, n) * node_gain
            active = rng.random(len(interferers)) < p
            interference = np.zeros(n)
            if len(interferers):
                dx = interferers[None, :, 0] - nodes[:, None, 0]
                dy = interferers[None, :, 1] - nodes[:, None, 1]
                h = rng.exponential(1.0, (n, len(interferers)))
                interference = (h * _gain(np.hypot(dx, dy), beta)) @ active
            received = base & ((interference == 0.0) | (signal > theta * interference))
        return SlotOutcome(BROADCAST, base, tuple([False] * n), tuple(bool(v) for v in received))

    node_on = rng.random(n) < p
    node_power = np.where(node_on, rng.exponential(1.0, n) * node_gain, 0.0)
    field_power = 0.0
    if len(interferers):
        inter_on = rng.random(len(interferers)) < p
        gains = _gain(np.hypot(interferers[:, 0], interferers[:, 1]), beta)
        powers = rng.exponential(1.0, len(gains)) * gains
        field_power = float(np.sum(np.where(inter_on, powers, 0.0)))
    received = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(node_on):
        interference = field_power + float(np.sum(np.delete(node_power, i)))
        received[i] = interference == 0.0 or node_power[i] > theta * interference
    return SlotOutcome(
        COLLECTION, False, tuple(bool(v) for v in node_on), tuple(bool(v) for v in received)
    )
