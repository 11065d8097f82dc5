from __future__ import annotations

import logging
from enum import Enum
from typing import AbstractSet, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from ..generators.kv_workload import AccessEvent
from ..heap import Heap, ObjectHeader
from ..heap.heap_model import HOTNESS_SHIFT, LOWER_MASK

LOG = logging.getLogger(__name__)

NS_PER_MS = 1_000_000


class TrackerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["periodic", "sampling"] = "periodic"
    # tracking is on for 1 ms out of every `period` ms (periodic) or every
    # `period`-th tracked access (sampling)
    period: int = Field(1, ge=1)
    phase_ms: int = Field(0, ge=0)
    refresh_ratio: float = Field(0.5, gt=0, lt=1)


class ActivationGate:
    """Virtual-time gate: active during the first millisecond of each period."""

    def __init__(self, period: int = 1, phase_ms: int = 0) -> None:
        if period < 1:
            raise ValueError(f"activation period must be >= 1, got {period}")
        self.period = period
        self.phase_ms = phase_ms

    def is_active(self, time_ns: int) -> bool:
        return ((time_ns // NS_PER_MS) - self.phase_ms) % self.period == 0


class ContentionOutcome(str, Enum):
    RETRY = "retry"
    REAL_CONFLICT = "real_conflict"


def classify_cas_failure(before: int, after: int) -> ContentionOutcome:
    """A failed lock CAS is spurious when only the hotness bits moved."""
    if (before & LOWER_MASK) == (after & LOWER_MASK):
        return ContentionOutcome.RETRY
    return ContentionOutcome.REAL_CONFLICT


def simulate_header_contention(
    header: ObjectHeader,
    concurrent_lock_write: bool,
    concurrent_increment: bool = True,
) -> ContentionOutcome:
    """Replay one failed lock CAS against `header` and decide whether to retry."""
    before = header.raw
    if concurrent_increment:
        header.increment()
    if concurrent_lock_write:
        header.set_lower_bits(header.lower_bits ^ 0b11)
    return classify_cas_failure(before, header.raw)


class HotnessTracker:
    """Per-object counting at delinquent (site, context) pairs."""

    def __init__(self, heap: Heap, config: Optional[TrackerConfig] = None) -> None:
        self.heap = heap
        self.config = config or TrackerConfig()
        self.gate = ActivationGate(self.config.period, self.config.phase_ms)
        self.increments = 0
        self.saturated_skips = 0
        self._tracked_accesses = 0

    def on_access(self, event: AccessEvent, delinquent: AbstractSet[Tuple[int, int]]) -> bool:
        """Count the access when it comes from a delinquent site; True when a counter moved."""
        obj = self.heap.lookup(event.object)
        if (event.site, event.context) not in delinquent:
            return False
        if self.config.mode == "periodic":
            if not self.gate.is_active(event.time):
                return False
        else:
            self._tracked_accesses += 1
            if self._tracked_accesses % self.config.period:
                return False
        if obj.header.increment():
            self.increments += 1
            return True
        self.saturated_skips += 1
        return False

    def refresh_counters(self, ratio: Optional[float] = None) -> int:
        """Floor-scale every live counter; returns how many objects were visited."""
        ratio = self.config.refresh_ratio if ratio is None else ratio
        visited = 0
        for obj in self.heap.objects.values():
            if obj.header.raw >> HOTNESS_SHIFT:
                obj.header.scale(ratio)
            visited += 1
        for large in self.heap.large_objects.values():
            large.header.scale(ratio)
            visited += 1
        return visited
