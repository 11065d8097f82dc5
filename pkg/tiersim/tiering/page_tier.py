from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Set

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..heap.heap_model import SMALL_PAGE

LOG = logging.getLogger(__name__)

CACHE_LINE = 64


class TierConfig(BaseModel):
    """Fast-tier sizing, page granularity and the latency/bandwidth model."""

    model_config = ConfigDict(extra="forbid")

    page_size: int = Field(SMALL_PAGE, gt=0)
    fast_fraction: float = Field(0.2, gt=0, le=1)
    fast_latency_ns: float = Field(100.0, gt=0)
    slow_latency_ns: float = Field(300.0, gt=0)
    migration_bandwidth: float = Field(1e9, gt=0)
    # sampled misses between migration epochs; defaults to decay_window // 10
    epoch_samples: Optional[int] = Field(None, ge=1)

    @field_validator("page_size")
    @classmethod
    def _page_multiple(cls, value: int) -> int:
        if value % SMALL_PAGE or value & (value - 1):
            raise ValueError(f"page_size must be a power-of-two multiple of {SMALL_PAGE}, got {value}")
        return value

    @model_validator(mode="after")
    def _latency_order(self) -> "TierConfig":
        if self.slow_latency_ns < self.fast_latency_ns:
            raise ValueError("slow_latency_ns must be >= fast_latency_ns")
        return self


@dataclass
class MigrationReport:
    time_ns: int
    promoted_pages: int
    demoted_pages: int
    fast_pages: int
    moved_bytes: int
    cost_ns: float

    def as_row(self) -> Dict[str, object]:
        return asdict(self)


class TierState:
    """Page residency (fast set; every other page is slow) plus decayed per-page sample counts."""

    def __init__(self, page_size: int, fast_capacity: int, migration_bandwidth: float = 1e9) -> None:
        if fast_capacity < 0:
            raise ValueError(f"fast capacity must be >= 0, got {fast_capacity}")
        self.page_size = page_size
        self.fast_capacity = fast_capacity
        self.capacity_pages = fast_capacity // page_size
        self.migration_bandwidth = migration_bandwidth
        self.fast: Set[int] = set()
        self.page_counts: Dict[int, int] = {}
        self.epochs = 0

    def is_fast(self, page: int) -> bool:
        return page in self.fast

    @property
    def fast_bytes(self) -> int:
        return len(self.fast) * self.page_size

    def record_page_sample(self, page: int) -> None:
        self.page_counts[page] = self.page_counts.get(page, 0) + 1

    def decay(self, ratio: float = 0.5) -> None:
        for page in list(self.page_counts):
            value = int(self.page_counts[page] * ratio)
            if value:
                self.page_counts[page] = value
            else:
                del self.page_counts[page]

    def migrate_epoch(self, now: int = 0) -> MigrationReport:
        """Make the top-count pages fast, up to capacity; ties go to the lower page id.

        Pages without samples never displace a resident, so free fast slots keep
        whatever already sits in them.
        """
        ranked = sorted(self.page_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        target = {page for page, count in ranked[: self.capacity_pages] if count > 0}
        spare = self.capacity_pages - len(target)
        if spare > 0:
            keep = sorted(self.fast - target)[:spare]
            target.update(keep)
        promoted = target - self.fast
        demoted = self.fast - target
        self.fast = target
        self.epochs += 1
        moved = (len(promoted) + len(demoted)) * self.page_size
        report = MigrationReport(
            time_ns=now,
            promoted_pages=len(promoted),
            demoted_pages=len(demoted),
            fast_pages=len(self.fast),
            moved_bytes=moved,
            cost_ns=moved / self.migration_bandwidth * 1e9,
        )
        LOG.debug(
            f"migration epoch {self.epochs}: +{report.promoted_pages} -{report.demoted_pages} pages, "
            f"{report.fast_pages}/{self.capacity_pages} fast"
        )
        return report


class LineCacheFilter:
    """LRU cache of 64-byte lines; a hit means the access never reaches memory."""

    def __init__(self, lines: int) -> None:
        if lines < 1:
            raise ValueError(f"line cache needs at least one line, got {lines}")
        self.lines = lines
        self._cache: "OrderedDict[int, None]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def access(self, address: int) -> bool:
        line = address // CACHE_LINE
        if line in self._cache:
            self._cache.move_to_end(line)
            self.hits += 1
            return True
        self._cache[line] = None
        if len(self._cache) > self.lines:
            self._cache.popitem(last=False)
        self.misses += 1
        return False


def fast_capacity_for(footprint: int, fast_fraction: float) -> int:
    return int(footprint * fast_fraction)
