"""Per-node age of information under generate-at-will updates.

Provides:
    - AgeLedger: value type holding one age per node
    - step_age(), aob(), aoc(): the slot recursion and its max reductions
    - age_series(): the same recursion for a whole block of slots at once
    - measure_delay(): forward broadcast/collection delay from a reference slot
    - write_age_trace(): ``slot,node_index,age`` CSV export

Updates are generated at will, so an age resets to 1 in every slot with a
successful reception and grows by one otherwise. Ages start at 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .channel import (
    BROADCAST,
    COLLECTION,
    DEFAULT_BATCH_ELEMENTS,
    MODES,
    NetworkParams,
    SlotOutcome,
    draw_slots,
)
from .geometry import Realization
from .util import LOG, ensure_dir

DEFAULT_MAX_DELAY_SLOTS = 10**8

_FIRST_DELAY_BATCH = 64
_MAX_DELAY_BATCH = 1 << 16


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True)
class AgeLedger:
    """Ages (in slots) of the latest update per node.

    Attributes:
        ages: One positive integer per node
        mode: "broadcast" (ages at the receivers) or "collection" (ages at the base station)
    """

    ages: Tuple[int, ...]
    mode: str = BROADCAST

    def __post_init__(self) -> None:
        _check_mode(self.mode)
        if any(a < 1 for a in self.ages):
            raise ValueError(f"ages must be >= 1, got {self.ages}")

    @property
    def node_count(self) -> int:
        return len(self.ages)


def initial_ledger(node_count: int, mode: str = BROADCAST) -> AgeLedger:
    """Ledger at t = 0: every node holds a fresh update (age 1)."""
    if node_count < 0:
        raise ValueError(f"node_count must be >= 0, got {node_count}")
    return AgeLedger((1,) * node_count, mode)


def step_age(ledger: AgeLedger, outcome: SlotOutcome) -> AgeLedger:
    """Advance the ledger by one slot.

    Example:
        >>> slot = SlotOutcome("broadcast", True, (False, False), (False, True))
        >>> step_age(AgeLedger((3, 7)), slot).ages
        (4, 1)

    Raises:
        ValueError: Outcome sized for a different node count
    """
    if len(outcome.received) != ledger.node_count:
        raise ValueError(
            f"slot outcome covers {len(outcome.received)} node(s), ledger holds {ledger.node_count}"
        )
    ages = tuple(1 if got else age + 1 for age, got in zip(ledger.ages, outcome.received))
    return AgeLedger(ages, ledger.mode)


def aob(ledger: AgeLedger) -> int:
    """Age of broadcast: the largest receiver age, 0 for an empty node set."""
    if ledger.mode != BROADCAST:
        raise ValueError("aob is defined for broadcast ledgers")
    return max(ledger.ages, default=0)


def aoc(ledger: AgeLedger) -> int:
    """Age of collection: the largest age at the base station, 0 for an empty node set."""
    if ledger.mode != COLLECTION:
        raise ValueError("aoc is defined for collection ledgers")
    return max(ledger.ages, default=0)


def age_series(
    received: np.ndarray,
    last_reception: Optional[np.ndarray] = None,
    offset: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Ages after every slot of a block of reception indicators.

    Row ``k`` of ``received`` is absolute slot ``offset + k``. The age of
    node i after slot t is ``t - last_i(t) + 1`` where ``last_i(t)`` is the
    most recent slot <= t with a reception; a node that never received keeps
    ``last = -1`` so its age continues from the initial value 1.

    Args:
        received: (T, n) boolean reception matrix
        last_reception: Last reception slot per node before this block (default all -1)
        offset: Absolute index of the first row

    Returns:
        (ages, last): the (T, n) int64 age matrix and the updated last-reception vector
    """
    received = np.asarray(received, dtype=bool)
    if received.ndim != 2:
        raise ValueError(f"received must be 2-D (slots, nodes), got shape {received.shape}")
    count, n = received.shape
    last = (
        np.full(n, -1, dtype=np.int64)
        if last_reception is None
        else np.asarray(last_reception, dtype=np.int64)
    )
    if last.shape != (n,):
        raise ValueError(f"last_reception must have shape ({n},), got {last.shape}")
    if count == 0:
        return np.zeros((0, n), dtype=np.int64), last.copy()

    slots = np.arange(offset, offset + count, dtype=np.int64)
    marks = np.where(received, slots[:, None], np.int64(-1))
    latest = np.maximum(np.maximum.accumulate(marks, axis=0), last[None, :])
    return slots[:, None] - latest + 1, latest[-1].copy()


def max_age_series(ages: np.ndarray) -> np.ndarray:
    """Per-slot maximum over nodes (AoB or AoC trajectory); zeros when there are no nodes."""
    ages = np.asarray(ages)
    if ages.shape[1] == 0:
        return np.zeros(ages.shape[0], dtype=np.int64)
    return ages.max(axis=1)


@dataclass(frozen=True)
class DelayRecord:
    """Outcome of one forward delay measurement.

    Attributes:
        start_slot: Reference slot the measurement starts from
        completion_slot: Slot index after which every node has received (for a
            partial record: the slot the measurement stopped at)
        per_node_first_reception: First reception time per node, counted so that a
            reception in ``start_slot`` gives ``start_slot + 1``; None if not yet received
    """

    start_slot: int
    completion_slot: int
    per_node_first_reception: Tuple[Optional[int], ...]

    def __post_init__(self) -> None:
        if self.complete:
            firsts = [int(f) for f in self.per_node_first_reception if f is not None]
            if self.completion_slot != max(firsts):
                raise ValueError("completion_slot must equal the latest first reception")
            if self.completion_slot < self.start_slot + 1:
                raise ValueError("completion_slot must be >= start_slot + 1")

    @property
    def complete(self) -> bool:
        return bool(self.per_node_first_reception) and all(
            f is not None for f in self.per_node_first_reception
        )

    @property
    def delay(self) -> int:
        return self.completion_slot - self.start_slot


class DelayTimeoutError(RuntimeError):
    """A delay measurement hit its slot cap before every node had received."""

    def __init__(self, record: DelayRecord, max_slots: int):
        pending = sum(1 for f in record.per_node_first_reception if f is None)
        super().__init__(
            f"delay measurement exceeded {max_slots} slot(s) with {pending} node(s) still waiting"
        )
        self.record = record
        self.max_slots = max_slots


def measure_delay(
    realization: Realization,
    mode: str,
    params: NetworkParams,
    rng: np.random.Generator,
    start_slot: int = 0,
    max_slots: int = DEFAULT_MAX_DELAY_SLOTS,
    batch_elements: int = DEFAULT_BATCH_ELEMENTS,
) -> DelayRecord:
    """Simulate forward from ``start_slot`` until every node has at least one reception.

    Slots are drawn in blocks that start at 64 and double, so short delays
    stay cheap and long ones do not pay per-slot overhead.

    Raises:
        ValueError: Empty node set or unknown mode
        DelayTimeoutError: ``max_slots`` slots elapsed first (carries the partial record)
    """
    _check_mode(mode)
    n = realization.node_count
    if n == 0:
        raise ValueError("measure_delay needs at least one node")
    if max_slots < 1:
        raise ValueError(f"max_slots must be >= 1, got {max_slots}")

    first: list[Optional[int]] = [None] * n
    done = 0
    batch = _FIRST_DELAY_BATCH
    while done < max_slots:
        count = min(batch, max_slots - done)
        received = draw_slots(realization, mode, params, rng, count, batch_elements)
        for i in range(n):
            if first[i] is None:
                hits = np.flatnonzero(received[:, i])
                if hits.size:
                    first[i] = start_slot + done + int(hits[0]) + 1
        done += count
        if all(f is not None for f in first):
            firsts = [int(f) for f in first if f is not None]
            return DelayRecord(start_slot, max(firsts), tuple(first))
        batch = min(batch * 2, _MAX_DELAY_BATCH)

    record = DelayRecord(start_slot, start_slot + done, tuple(first))
    LOG.warning("Delay timeout after %d slot(s) (%s mode)", done, mode)
    raise DelayTimeoutError(record, max_slots)


def delay_samples(
    realization: Realization,
    mode: str,
    params: NetworkParams,
    rng: np.random.Generator,
    count: int,
    max_slots: int = DEFAULT_MAX_DELAY_SLOTS,
) -> np.ndarray:
    """Independent delay samples from consecutive measurements on one stream."""
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        out[k] = measure_delay(realization, mode, params, rng, 0, max_slots).delay
    return out


def write_age_trace(
    ages: np.ndarray | Sequence[Sequence[int]], path: str | Path, offset: int = 0
) -> Path:
    """Write an age matrix as long-format CSV with columns ``slot,node_index,age``.

    Rows are ordered by slot, then node index.
    """
    arr = np.asarray(ages, dtype=np.int64)
    if arr.ndim != 2:
        raise ValueError(f"ages must be 2-D (slots, nodes), got shape {arr.shape}")
    count, n = arr.shape
    frame = pd.DataFrame(
        {
            "slot": np.repeat(np.arange(offset, offset + count, dtype=np.int64), n),
            "node_index": np.tile(np.arange(n, dtype=np.int64), count),
            "age": arr.reshape(-1),
        }
    )
    out = ensure_dir(Path(path).parent) / Path(path).name
    frame.to_csv(out, index=False)
    LOG.debug("Age trace: %d slot(s) x %d node(s) -> %s", count, n, out)
    return out
