from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple, TypedDict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..generators.kv_workload import AccessEvent

LOG = logging.getLogger(__name__)

SiteKey = Tuple[int, int]
_GAP_BATCH = 4096
DecayListener = Callable[[int, float], None]


class ProfilerConfig(BaseModel):
    """Sampling and decay knobs of the miss profiler."""

    model_config = ConfigDict(extra="forbid")

    sample_rate: int = Field(2000, ge=1)
    # sampled misses per decay window
    decay_window: int = Field(1_000_000, ge=1)
    decay_ratio: float = Field(0.5, gt=0, lt=1)
    delinquency_threshold: float = Field(0.01, gt=0, lt=1)
    seed: int = 0


@dataclass(slots=True)
class SiteStats:
    key: SiteKey
    count: int = 0


class SiteRow(TypedDict):
    site: int
    context: int
    count: int
    ratio: float
    delinquent: bool


class Profiler:
    """Subsamples miss events and keeps windowed, decayed per-(site, context) counts."""

    def __init__(self, config: Optional[ProfilerConfig] = None) -> None:
        self.config = config or ProfilerConfig()
        self._rng = np.random.Generator(np.random.PCG64(self.config.seed))
        self._gaps: List[int] = []
        self._skip = self._next_gap()
        self.stats: Dict[SiteKey, SiteStats] = {}
        self.total_samples = 0
        self.samples_since_decay = 0
        self.decay_ticks = 0
        self._listeners: List[DecayListener] = []

    def _next_gap(self) -> int:
        """Events to skip before the next sample, geometric so each event is kept with p = 1/R."""
        rate = self.config.sample_rate
        if rate == 1:
            return 0
        if not self._gaps:
            self._gaps = (self._rng.geometric(1.0 / rate, size=_GAP_BATCH) - 1)[::-1].tolist()
        return self._gaps.pop()

    def add_decay_listener(self, listener: DecayListener) -> None:
        self._listeners.append(listener)

    def sample(self, event: AccessEvent) -> Optional[AccessEvent]:
        """Return the event if it is selected by the 1-in-R sampler, else None."""
        if self._skip:
            self._skip -= 1
            return None
        self._skip = self._next_gap()
        key = (event.site, event.context)
        stats = self.stats.get(key)
        if stats is None:
            stats = self.stats[key] = SiteStats(key)
        stats.count += 1
        self.total_samples += 1
        self.samples_since_decay += 1
        if self.samples_since_decay >= self.config.decay_window:
            self.decay_tick(event.time)
        return event

    def decay_tick(self, now: int = 0) -> None:
        ratio = self.config.decay_ratio
        for key in list(self.stats):
            stats = self.stats[key]
            stats.count = int(stats.count * ratio)
            if stats.count == 0:
                del self.stats[key]
        self.samples_since_decay = 0
        self.decay_ticks += 1
        for listener in self._listeners:
            listener(now, ratio)

    @property
    def total_count(self) -> int:
        return sum(s.count for s in self.stats.values())

    def count(self, key: SiteKey) -> int:
        stats = self.stats.get(key)
        return stats.count if stats else 0

    def delinquent_set(self, threshold: Optional[float] = None) -> FrozenSet[SiteKey]:
        """Keys whose share of the decayed total is strictly above the threshold."""
        limit = self.config.delinquency_threshold if threshold is None else threshold
        total = self.total_count
        if total == 0:
            return frozenset()
        return frozenset(k for k, s in self.stats.items() if s.count / total > limit)

    def coverage_against(self, reference: Iterable[SiteKey]) -> float:
        return coverage(self.delinquent_set(), reference)

    def site_rows(self) -> List[SiteRow]:
        total = self.total_count
        delinquent = self.delinquent_set()
        rows: List[SiteRow] = []
        for key in sorted(self.stats):
            count = self.stats[key].count
            rows.append(
                {
                    "site": key[0],
                    "context": key[1],
                    "count": count,
                    "ratio": count / total if total else 0.0,
                    "delinquent": key in delinquent,
                }
            )
        return rows


def coverage(found: Iterable[SiteKey], reference: Iterable[SiteKey]) -> float:
    """|found ∩ reference| / |reference|, 1.0 for an empty reference."""
    ref = set(reference)
    if not ref:
        return 1.0
    return len(ref & set(found)) / len(ref)


def profile_stream(events: Iterable[AccessEvent], config: ProfilerConfig) -> Profiler:
    """Run a fresh profiler over a finite stream (offline delinquency reference)."""
    profiler = Profiler(config)
    for ev in events:
        profiler.sample(ev)
    return profiler
