from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, Iterator, List, Literal, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..heap import Heap, LargeObject, heap_capacity_for
from ..heap.heap_model import LARGE_OBJECT_THRESHOLD, REGION_SIZE, SMALL_PAGE

LOG = logging.getLogger(__name__)

METADATA_SIZE = 64
DIRECTORY_SLOT = 8

# Stable site ids, one per logical code location.
S_DIR = 0
S_META = 1
S_VAL = 2
BACKGROUND_SITE_BASE = 100

CTX_GET = 0
CTX_PUT = 1

_BATCH = 1 << 14


class AccessEvent(NamedTuple):
    """One simulated LLC-missing access."""

    time: int
    site: int
    context: int
    object: int
    offset: int = 0
    is_miss: bool = True


class ZipfianDistribution(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["zipfian"] = "zipfian"
    s: float = Field(0.99, gt=0)


class HotWarmDistribution(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["hotwarm"] = "hotwarm"
    hot_fraction: float = Field(0.2, gt=0, lt=1)
    hot_mass: float = Field(0.9, gt=0, lt=1)


class UniformDistribution(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["uniform"] = "uniform"


Distribution = Annotated[
    Union[ZipfianDistribution, HotWarmDistribution, UniformDistribution],
    Field(discriminator="kind"),
]


class ShiftPoint(BaseModel):
    model_config = ConfigDict(extra="forbid")
    time_ns: int = Field(ge=0)
    seed: int = 0
    kind: Literal["random", "reverse"] = "random"


class KvWorkloadSpec(BaseModel):
    """Key-value store workload: key population, popularity law and request mix."""

    model_config = ConfigDict(extra="forbid")

    key_count: int = Field(100_000, gt=0)
    value_size: int = Field(256, gt=0)
    payload_objects: int = Field(1, ge=1)
    distribution: Distribution = Field(default_factory=ZipfianDistribution)
    qps: int = Field(1_000_000, gt=0)
    get_fraction: float = Field(0.95, ge=0, le=1)
    directory_access: bool = True
    background_sites: int = Field(16, ge=0)
    background_fraction: float = Field(0.05, ge=0, lt=1)
    shift_schedule: List[ShiftPoint] = Field(default_factory=list)
    seed: int = 0

    @model_validator(mode="after")
    def _check_shape(self) -> "KvWorkloadSpec":
        if self.value_size < self.payload_objects:
            raise ValueError(
                f"value_size {self.value_size} cannot be split into {self.payload_objects} payload objects"
            )
        if self.background_fraction > 0 and self.background_sites == 0:
            raise ValueError("background_fraction > 0 needs at least one background site")
        times = [p.time_ns for p in self.shift_schedule]
        if times != sorted(times):
            raise ValueError("shift_schedule must be ordered by time_ns")
        return self

    def payload_sizes(self) -> List[int]:
        base, rest = divmod(self.value_size, self.payload_objects)
        return [base] * (self.payload_objects - 1) + [base + rest]


@dataclass
class KvHeap:
    """Heap populated with one metadata object and the payload objects of every key."""

    heap: Heap
    metadata_ids: np.ndarray
    payload_ids: np.ndarray  # shape (key_count, payload_objects)
    directory_id: int
    footprint: int
    spec: KvWorkloadSpec = field(repr=False)

    def key_objects(self, key: int) -> List[int]:
        return [int(self.metadata_ids[key])] + [int(i) for i in self.payload_ids[key]]


def kv_footprint(spec: KvWorkloadSpec) -> int:
    return spec.key_count * (METADATA_SIZE + spec.value_size) + spec.key_count * DIRECTORY_SLOT


def build_kv_heap(
    spec: KvWorkloadSpec,
    region_size: int = REGION_SIZE,
    page_size: int = SMALL_PAGE,
    large_object_threshold: int = LARGE_OBJECT_THRESHOLD,
    min_spare_regions: int = 4,
    check_invariants: bool = False,
) -> KvHeap:
    """Allocate the key directory, then metadata + payload per key, contiguously."""
    footprint = kv_footprint(spec)
    heap = Heap(
        heap_capacity_for(footprint, region_size, min_spare_regions),
        region_size=region_size,
        page_size=page_size,
        large_object_threshold=large_object_threshold,
        check_invariants=check_invariants,
    )
    directory = heap.allocate(spec.key_count * DIRECTORY_SLOT)

    sizes = spec.payload_sizes()
    group = METADATA_SIZE + sum(s for s in sizes if s <= large_object_threshold)
    keep_together = group <= region_size
    metadata_ids = np.empty(spec.key_count, dtype=np.int64)
    payload_ids = np.empty((spec.key_count, spec.payload_objects), dtype=np.int64)
    for key in range(spec.key_count):
        if keep_together:
            heap.ensure_room(group)
        metadata_ids[key] = heap.allocate(METADATA_SIZE).id
        for j, size in enumerate(sizes):
            payload_ids[key, j] = heap.allocate(size).id
    heap.maybe_verify()
    kind = "large object" if isinstance(directory, LargeObject) else "small object"
    LOG.info(
        f"KV heap built: {spec.key_count} keys, footprint {footprint} B, "
        f"{len(heap.regions)} regions in use of {heap.region_count}, directory is a {kind}"
    )
    return KvHeap(
        heap=heap,
        metadata_ids=metadata_ids,
        payload_ids=payload_ids,
        directory_id=directory.id,
        footprint=footprint,
        spec=spec,
    )


def zipf_cdf(key_count: int, s: float) -> np.ndarray:
    weights = 1.0 / np.power(np.arange(1, key_count + 1, dtype=np.float64), s)
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def hot_key_count(key_count: int, hot_fraction: float) -> int:
    return min(key_count, max(1, int(round(hot_fraction * key_count))))


class KvWorkload:
    """Seeded request generator over a built KV heap.

    Popularity is drawn over ranks; `rank_to_key` maps rank to key and is what a
    hotness shift re-permutes, so object identities never change.
    """

    def __init__(self, kv: KvHeap) -> None:
        self.kv = kv
        self.spec = kv.spec
        self._rng = np.random.Generator(np.random.PCG64(self.spec.seed))
        self.rank_to_key = self._rng.permutation(self.spec.key_count)
        self._key_list: List[int] = self.rank_to_key.tolist()
        self._cdf: Optional[np.ndarray] = None
        if isinstance(self.spec.distribution, ZipfianDistribution):
            self._cdf = zipf_cdf(self.spec.key_count, self.spec.distribution.s)
        self._pending_shifts = list(self.spec.shift_schedule)
        self.shifts_applied: List[int] = []
        self._emitted = 0
        self._iter: Optional[Iterator[AccessEvent]] = None

    # ------------------------------------------------------------- drawing

    def draw_ranks(self, count: int) -> np.ndarray:
        dist = self.spec.distribution
        k = self.spec.key_count
        if isinstance(dist, ZipfianDistribution):
            u = self._rng.random(count)
            return np.minimum(np.searchsorted(self._cdf, u, side="right"), k - 1)
        if isinstance(dist, HotWarmDistribution):
            hot = hot_key_count(k, dist.hot_fraction)
            in_hot = self._rng.random(count) < dist.hot_mass
            if hot == k:
                return self._rng.integers(0, k, size=count)
            hot_ranks = self._rng.integers(0, hot, size=count)
            warm_ranks = self._rng.integers(hot, k, size=count)
            return np.where(in_hot, hot_ranks, warm_ranks)
        return self._rng.integers(0, k, size=count)

    def rank_mass(self) -> np.ndarray:
        """Exact access probability of each popularity rank."""
        dist = self.spec.distribution
        k = self.spec.key_count
        if isinstance(dist, ZipfianDistribution):
            return np.diff(np.concatenate(([0.0], self._cdf)))
        if isinstance(dist, HotWarmDistribution):
            hot = hot_key_count(k, dist.hot_fraction)
            mass = np.full(k, (1 - dist.hot_mass) / max(1, k - hot))
            mass[:hot] = dist.hot_mass / hot if hot < k else 1.0 / k
            return mass
        return np.full(k, 1.0 / k)

    def key_mass(self) -> np.ndarray:
        mass = np.empty(self.spec.key_count)
        mass[self.rank_to_key] = self.rank_mass()
        return mass

    def apply_hotness_shift(
        self,
        seed: Optional[int] = None,
        kind: str = "random",
        permutation: Optional[np.ndarray] = None,
    ) -> "KvWorkload":
        """Re-permute key popularity: rank r now maps to the key rank `perm[r]` had."""
        k = self.spec.key_count
        if permutation is not None:
            perm = np.asarray(permutation)
            if sorted(perm.tolist()) != list(range(k)):
                raise ValueError("permutation must be a permutation of range(key_count)")
        elif kind == "reverse":
            perm = np.arange(k - 1, -1, -1)
        elif kind == "random":
            perm = np.random.Generator(np.random.PCG64(seed or 0)).permutation(k)
        else:
            raise ValueError(f"unknown shift kind: {kind}")
        self.rank_to_key = self.rank_to_key[perm]
        self._key_list = self.rank_to_key.tolist()
        return self

    # -------------------------------------------------------------- events

    def events(self, limit: Optional[int] = None) -> Iterator[AccessEvent]:
        """Yield events until `limit` have been emitted (forever when None)."""
        spec = self.spec
        kv = self.kv
        per_event_ns = 10**9
        meta_ids = kv.metadata_ids.tolist()
        payload_ids = kv.payload_ids.tolist()
        dir_id = kv.directory_id
        value_sites = [S_VAL + j for j in range(spec.payload_objects)]

        while True:
            ranks = self.draw_ranks(_BATCH).tolist()
            is_put = (self._rng.random(_BATCH) >= spec.get_fraction).tolist()
            is_bg = (self._rng.random(_BATCH) < spec.background_fraction).tolist()
            bg_site = self._rng.integers(0, max(1, spec.background_sites), size=_BATCH).tolist()
            bg_key = self._rng.integers(0, spec.key_count, size=_BATCH).tolist()
            for i in range(_BATCH):
                if is_bg[i]:
                    batch = ((BACKGROUND_SITE_BASE + bg_site[i], CTX_GET, meta_ids[bg_key[i]], 0),)
                else:
                    key = self._key_list[ranks[i]]
                    ctx = CTX_PUT if is_put[i] else CTX_GET
                    batch = []
                    if spec.directory_access:
                        batch.append((S_DIR, ctx, dir_id, DIRECTORY_SLOT * key))
                    batch.append((S_META, ctx, meta_ids[key], 0))
                    for site, obj in zip(value_sites, payload_ids[key]):
                        batch.append((site, ctx, obj, 0))
                for site, ctx, obj, offset in batch:
                    if limit is not None and self._emitted >= limit:
                        return
                    now = self._emitted * per_event_ns // spec.qps
                    self._maybe_shift(now)
                    self._emitted += 1
                    yield AccessEvent(now, site, ctx, obj, offset)

    def next_event(self) -> AccessEvent:
        if self._iter is None:
            self._iter = self.events()
        return next(self._iter)

    def _maybe_shift(self, now: int) -> None:
        while self._pending_shifts and self._pending_shifts[0].time_ns <= now:
            point = self._pending_shifts.pop(0)
            self.apply_hotness_shift(seed=point.seed, kind=point.kind)
            self.shifts_applied.append(now)
            LOG.info(f"hotness shift ({point.kind}) applied at t={now} ns")

    @property
    def emitted(self) -> int:
        return self._emitted


def zipf_rank_probability(rank: int, key_count: int, s: float) -> float:
    harmonic = math.fsum(1.0 / (r ** s) for r in range(1, key_count + 1))
    return (1.0 / rank ** s) / harmonic
