"""Seeded Monte Carlo estimation of the expected broadcast/collection age.

Provides:
    - SimConfig / SimResult: run settings and the estimate with its 95% CI
    - derive_stream(): one independent random stream per label path
    - run_instance(): time-averaged AoB/AoC on a fixed realization
    - run_spatial_average(): the same averaged over sampled realizations
    - mean_delay(): forward delay samples on a fixed realization
    - suggest_warmup(): default warmup length
    - age_trace(): per-slot ages of one trajectory

Streams are addressed by ``(realization, trial, purpose)`` labels under the
master seed, so every trial draws the same numbers whatever the number of
worker processes or the order they finish in. Results are merged in label
order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.stats import norm

from .age_dynamics import (
    DEFAULT_MAX_DELAY_SLOTS,
    DelayTimeoutError,
    age_series,
    max_age_series,
    measure_delay,
)
from .analytics import harmonic
from .channel import (
    BROADCAST,
    DEFAULT_BATCH_ELEMENTS,
    MODES,
    NetworkParams,
    broadcast_success_probs,
    collection_success_probs,
    draw_slots,
)
from .geometry import Realization, sample_realization
from .util import LOG

# Purpose labels (last element of a stream label path).
PURPOSE_GEOMETRY = 0
PURPOSE_SLOTS = 1
PURPOSE_DELAY = 2

MIN_AUTO_WARMUP = 10**4
MAX_AUTO_WARMUP = 10**6

# Slots simulated between age reductions within one trial.
_CHUNK_SLOTS = 1 << 16

_J = TypeVar("_J")
_T = TypeVar("_T")


class SimulationTimeoutError(RuntimeError):
    """A trial cannot produce a finite stationary average within its limits."""


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run settings.

    Attributes:
        params: Physical-layer constants
        mode: "broadcast" or "collection"
        slots_per_trial: Slots simulated per trial, warmup included
        warmup_slots: Leading slots discarded per trial; None picks suggest_warmup()
        trials: Independent trials per realization
        realizations: Sampled realizations (spatial averaging only)
        master_seed: Root of every random stream
        truncation_rel_tol: Interferer window tolerance (see truncation_window_radius)
        workers: Worker processes; 1 runs in-process
        max_delay_slots: Slot cap of a single delay measurement
        batch_elements: Random draws per vectorized batch
    """

    params: NetworkParams = field(default_factory=NetworkParams)
    mode: str = BROADCAST
    slots_per_trial: int = 250_000
    warmup_slots: Optional[int] = None
    trials: int = 10
    realizations: int = 50
    master_seed: int = 0
    truncation_rel_tol: float = 0.005
    workers: int = 1
    max_delay_slots: int = DEFAULT_MAX_DELAY_SLOTS
    batch_elements: int = DEFAULT_BATCH_ELEMENTS

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.slots_per_trial < 1:
            raise ValueError(f"slots_per_trial must be >= 1, got {self.slots_per_trial}")
        if self.warmup_slots is not None and not 0 <= self.warmup_slots < self.slots_per_trial:
            raise ValueError(
                "warmup_slots must satisfy 0 <= warmup_slots < slots_per_trial, "
                f"got {self.warmup_slots} (slots_per_trial={self.slots_per_trial})"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")
        if not 0.0 < self.truncation_rel_tol < 1.0:
            raise ValueError(
                f"truncation_rel_tol must satisfy 0 < tol < 1, got {self.truncation_rel_tol}"
            )
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.max_delay_slots < 1:
            raise ValueError(f"max_delay_slots must be >= 1, got {self.max_delay_slots}")
        if self.batch_elements < 1:
            raise ValueError(f"batch_elements must be >= 1, got {self.batch_elements}")


@dataclass(frozen=True)
class SimResult:
    """Monte Carlo estimate of an expected age.

    Attributes:
        mean_age: Estimate in slots
        ci_half_width: 95% confidence half-width (normal approximation)
        per_trial_means: Per-trial means (run_instance) or per-realization means
            (run_spatial_average), in label order
        realization_count: Realizations behind the estimate
        elapsed: Wall time in seconds
        trials: Trials per realization
        slots: Slots per trial, warmup included
    """

    mean_age: float
    ci_half_width: float
    per_trial_means: Tuple[float, ...]
    realization_count: int
    elapsed: float
    trials: int = 0
    slots: int = 0


def derive_stream(master_seed: int, labels: Sequence[int]) -> np.random.Generator:
    """Random stream for a label path under ``master_seed``.

    Identical labels give identical streams; distinct label paths give
    independent ones (numpy ``SeedSequence`` spawn keys).

    Example:
        >>> a = derive_stream(7, (0, 3, PURPOSE_SLOTS)).random(3)
        >>> b = derive_stream(7, (0, 3, PURPOSE_SLOTS)).random(3)
        >>> bool((a == b).all())
        True
    """
    key = tuple(int(label) for label in labels)
    if any(label < 0 for label in key):
        raise ValueError(f"stream labels must be >= 0, got {key}")
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=key))


def confidence_half_width(samples: Sequence[float]) -> float:
    """95% half-width ``z * s / sqrt(k)``; 0 for a single sample."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        return 0.0
    return float(norm.ppf(0.975) * arr.std(ddof=1) / math.sqrt(arr.size))


def _success_probs(realization: Realization, mode: str, params: NetworkParams) -> np.ndarray:
    if mode == BROADCAST:
        return broadcast_success_probs(realization, params)
    return collection_success_probs(realization, params)


def suggest_warmup(realization: Realization, config: SimConfig) -> int:
    """Default warmup: ``max(10**4, 20 * H_n / mu_min)`` capped at 10**6.

    ``H_n / mu_min`` is the collector-style delay scale of the worst node.
    A value that does not fit in the trial is clamped to half of it.
    """
    n = realization.node_count
    warmup = MIN_AUTO_WARMUP
    if n:
        mu_min = float(_success_probs(realization, config.mode, config.params).min())
        if mu_min > 0:
            warmup = int(min(MAX_AUTO_WARMUP, max(warmup, math.ceil(20 * harmonic(n) / mu_min))))
        else:
            warmup = MAX_AUTO_WARMUP
    if warmup >= config.slots_per_trial:
        clamped = config.slots_per_trial // 2
        LOG.warning(
            "Warmup %d does not fit in %d slot(s) per trial; using %d",
            warmup,
            config.slots_per_trial,
            clamped,
        )
        return clamped
    LOG.debug("Warmup: %d slot(s)", warmup)
    return warmup


def _trial_mean(
    realization: Realization, config: SimConfig, realization_index: int, trial: int, warmup: int
) -> float:
    rng = derive_stream(config.master_seed, (realization_index, trial, PURPOSE_SLOTS))
    n = realization.node_count
    last = np.full(n, -1, dtype=np.int64)
    total = 0
    done = 0
    while done < config.slots_per_trial:
        count = min(_CHUNK_SLOTS, config.slots_per_trial - done)
        received = draw_slots(
            realization, config.mode, config.params, rng, count, config.batch_elements
        )
        ages, last = age_series(received, last, done)
        skip = max(0, warmup - done)
        if skip < count:
            total += int(max_age_series(ages[skip:]).sum())
        done += count
    return total / (config.slots_per_trial - warmup)


def _run_trial(job: Tuple[Realization, SimConfig, int, int, int]) -> float:
    return _trial_mean(*job)


def _map_ordered(fn: Callable[[_J], _T], jobs: List[_J], workers: int) -> List[_T]:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _summarize(
    means: List[float], realization_count: int, started: float, config: SimConfig
) -> SimResult:
    if len(means) == 1:
        LOG.warning("Single sample: confidence half-width reported as 0")
    return SimResult(
        mean_age=float(np.mean(means)),
        ci_half_width=confidence_half_width(means),
        per_trial_means=tuple(float(m) for m in means),
        realization_count=realization_count,
        elapsed=time.perf_counter() - started,
        trials=config.trials,
        slots=config.slots_per_trial,
    )


def run_instance(
    realization: Realization, config: SimConfig, realization_index: int = 0
) -> SimResult:
    """Time-averaged AoB or AoC on a fixed realization.

    Each trial starts from ages 1, discards its warmup and averages the
    per-slot maximum age over the remaining slots. The estimate is the mean
    of the trial averages with a CI across trials.

    Raises:
        SimulationTimeoutError: A node can never receive, so the age grows without bound
    """
    started = time.perf_counter()
    if realization.node_count == 0:
        empty = (0.0,) * config.trials
        return SimResult(0.0, 0.0, empty, 1, 0.0, config.trials, config.slots_per_trial)

    probs = _success_probs(realization, config.mode, config.params)
    if np.any(probs <= 0.0):
        raise SimulationTimeoutError(
            f"{int(np.sum(probs <= 0.0))} node(s) can never receive in {config.mode} mode"
        )
    warmup = (
        suggest_warmup(realization, config) if config.warmup_slots is None else config.warmup_slots
    )
    jobs = [(realization, config, realization_index, t, warmup) for t in range(config.trials)]
    means = _map_ordered(_run_trial, jobs, config.workers)
    result = _summarize(means, 1, started, config)
    LOG.debug(
        "Instance %d: n=%d mean=%.6g ci=%.3g (%d trial(s))",
        realization_index,
        realization.node_count,
        result.mean_age,
        result.ci_half_width,
        config.trials,
    )
    return result


def indexed_realization(config: SimConfig, index: int) -> Realization:
    """The ``index``-th realization of a spatial average (deterministic in the master seed)."""
    rng = derive_stream(config.master_seed, (index, 0, PURPOSE_GEOMETRY))
    return sample_realization(config.params, rng, config.truncation_rel_tol)


def _realization_mean(job: Tuple[SimConfig, int]) -> float:
    config, index = job
    realization = indexed_realization(config, index)
    LOG.debug(
        "Realization %d: %d node(s), %d interferer(s), Rw=%.4g",
        index,
        realization.node_count,
        realization.interferer_count,
        realization.window_radius,
    )
    return run_instance(realization, replace(config, workers=1), index).mean_age


def run_spatial_average(config: SimConfig) -> SimResult:
    """Expected age averaged over node and interferer placements.

    Realization ``k`` is sampled from stream ``(k, 0, geometry)`` and run
    with ``run_instance``; the CI is taken across realization means.
    """
    started = time.perf_counter()
    jobs = [(config, k) for k in range(config.realizations)]
    means = _map_ordered(_realization_mean, jobs, config.workers)
    return _summarize(means, config.realizations, started, config)


def mean_delay(realization: Realization, config: SimConfig, samples: int) -> SimResult:
    """Mean of independent forward delay samples on a fixed realization.

    Raises:
        SimulationTimeoutError: A delay measurement hit ``max_delay_slots``
    """
    if realization.node_count == 0:
        raise ValueError("mean_delay needs at least one node")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    started = time.perf_counter()
    rng = derive_stream(config.master_seed, (0, 0, PURPOSE_DELAY))
    delays = []
    for _ in range(samples):
        try:
            record = measure_delay(
                realization,
                config.mode,
                config.params,
                rng,
                max_slots=config.max_delay_slots,
                batch_elements=config.batch_elements,
            )
        except DelayTimeoutError as e:
            raise SimulationTimeoutError(str(e)) from e
        delays.append(float(record.delay))
    return SimResult(
        mean_age=float(np.mean(delays)),
        ci_half_width=confidence_half_width(delays),
        per_trial_means=tuple(delays),
        realization_count=1,
        elapsed=time.perf_counter() - started,
        trials=samples,
        slots=0,
    )


def age_trace(realization: Realization, config: SimConfig, slots: int) -> np.ndarray:
    """Per-slot ages of the first trial's stream, warmup included, as a (slots, n) array."""
    if slots < 0:
        raise ValueError(f"slots must be >= 0, got {slots}")
    rng = derive_stream(config.master_seed, (0, 0, PURPOSE_SLOTS))
    received = draw_slots(
        realization, config.mode, config.params, rng, slots, config.batch_elements
    )
    ages, _ = age_series(received)
    return ages
