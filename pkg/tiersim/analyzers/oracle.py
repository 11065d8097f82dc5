from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Literal, Tuple

import numpy as np
import pandas as pd

from ..generators.kv_workload import AccessEvent
from ..heap import Heap
from ..heap.heap_model import HUGE_PAGE, SMALL_PAGE

LOG = logging.getLogger(__name__)

Unit = Literal["object", "page4k", "page2m"]
UNITS: Tuple[Unit, ...] = ("object", "page4k", "page2m")


@dataclass
class ObjectLayout:
    """Start address, size and large-object flag per object id (arrays indexed by id)."""

    base: np.ndarray
    size: np.ndarray
    large: np.ndarray

    @property
    def object_count(self) -> int:
        return len(self.base)

    @classmethod
    def from_heap(cls, heap: Heap) -> "ObjectLayout":
        ids = list(heap.base_address)
        count = max(ids) + 1 if ids else 0
        base = np.full(count, -1, dtype=np.int64)
        size = np.zeros(count, dtype=np.int64)
        large = np.zeros(count, dtype=bool)
        for obj in heap.objects.values():
            base[obj.id] = heap.base_address[obj.id]
            size[obj.id] = obj.size
        for obj in heap.large_objects.values():
            base[obj.id] = obj.base_address
            size[obj.id] = obj.size
            large[obj.id] = True
        return cls(base=base, size=size, large=large)

    @classmethod
    def contiguous(cls, object_count: int, object_size: int = 256) -> "ObjectLayout":
        """Objects laid out back to back in id order, all of one size."""
        base = np.arange(object_count, dtype=np.int64) * object_size
        size = np.full(object_count, object_size, dtype=np.int64)
        return cls(base=base, size=size, large=np.zeros(object_count, dtype=bool))


def trace_arrays(events: Iterable[AccessEvent]) -> Tuple[np.ndarray, np.ndarray]:
    objects, offsets = [], []
    for ev in events:
        objects.append(ev.object)
        offsets.append(ev.offset)
    return np.asarray(objects, dtype=np.int64), np.asarray(offsets, dtype=np.int64)


def unit_keys(
    objects: np.ndarray, offsets: np.ndarray, layout: ObjectLayout, unit: Unit
) -> Tuple[np.ndarray, np.ndarray]:
    """Map each access to its relocation unit; returns (unit key per access, size per key)."""
    if len(objects) and (objects.max() >= layout.object_count or (layout.base[objects] < 0).any()):
        raise ValueError("trace references objects missing from the layout")
    address = layout.base[objects] + offsets
    if unit == "object":
        # large objects are page-managed, so their 4 KB pages are the units
        page_keys = layout.object_count + address // SMALL_PAGE
        keys = np.where(layout.large[objects], page_keys, objects)
        uniq = np.unique(keys)
        sizes = np.where(uniq < layout.object_count, layout.size[np.minimum(uniq, layout.object_count - 1)], SMALL_PAGE)
        return keys, sizes
    if unit == "page4k":
        keys = address // SMALL_PAGE
        return keys, np.full(len(np.unique(keys)), SMALL_PAGE, dtype=np.int64)
    if unit == "page2m":
        keys = address // HUGE_PAGE
        return keys, np.full(len(np.unique(keys)), HUGE_PAGE, dtype=np.int64)
    raise ValueError(f"unknown unit: {unit}")


def oracle_hit_mask(
    objects: np.ndarray, offsets: np.ndarray, layout: ObjectLayout, unit: Unit, capacity: int
) -> np.ndarray:
    """Per-access fast/slow verdict under the offline greedy fill.

    Pass one counts accesses per unit and admits units by descending count (lower key
    first on ties) until the next one no longer fits. Pass two marks the accesses whose
    unit was admitted.
    """
    keys, sizes = unit_keys(objects, offsets, layout, unit)
    if len(keys) == 0:
        return np.zeros(0, dtype=bool)
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    order = np.lexsort((uniq, -counts))
    filled = np.cumsum(sizes[order])
    admitted_count = int(np.searchsorted(filled, capacity, side="right"))
    admitted = np.zeros(len(uniq), dtype=bool)
    admitted[order[:admitted_count]] = True
    return admitted[inverse]


def oracle_placement(
    objects: np.ndarray, offsets: np.ndarray, layout: ObjectLayout, unit: Unit, capacity: int
) -> float:
    mask = oracle_hit_mask(objects, offsets, layout, unit, capacity)
    return float(mask.mean()) if len(mask) else 0.0


def intrapage_skew(counts: np.ndarray, layout: ObjectLayout, page_size: int = SMALL_PAGE) -> float:
    """Access-weighted mean coefficient of variation of object counts within a page.

    Only small objects take part, each attributed to the page holding its first byte;
    pages with a single object or no accesses carry no skew.
    """
    present = (layout.base >= 0) & ~layout.large
    ids = np.nonzero(present)[0]
    if len(ids) == 0:
        return 0.0
    per_object = np.zeros(layout.object_count, dtype=np.int64)
    per_object[: min(len(counts), layout.object_count)] = np.asarray(counts)[: layout.object_count]
    frame = pd.DataFrame({"page": layout.base[ids] // page_size, "count": per_object[ids]})
    grouped = frame.groupby("page")["count"]
    stats = pd.DataFrame(
        {"mean": grouped.mean(), "std": grouped.std(ddof=0), "total": grouped.sum(), "n": grouped.size()}
    )
    stats = stats[(stats["n"] >= 2) & (stats["total"] > 0)]
    if stats.empty:
        return 0.0
    cv = stats["std"] / stats["mean"]
    return float((cv * stats["total"]).sum() / stats["total"].sum())


def sample_observability(objects: np.ndarray, top_fraction: float, rate: int, seed: int = 0) -> float:
    """Fraction of the hottest `top_fraction` objects seen at least once in a 1-in-`rate` subsample."""
    if not 0 < top_fraction <= 1:
        raise ValueError(f"top_fraction must be in (0, 1], got {top_fraction}")
    if rate < 1:
        raise ValueError(f"rate must be >= 1, got {rate}")
    objects = np.asarray(objects, dtype=np.int64)
    if len(objects) == 0:
        return 0.0
    uniq, counts = np.unique(objects, return_counts=True)
    top = max(1, int(np.ceil(top_fraction * len(uniq))))
    hottest = uniq[np.lexsort((uniq, -counts))[:top]]
    rng = np.random.Generator(np.random.PCG64(seed))
    kept = objects[rng.random(len(objects)) < 1.0 / rate]
    return float(np.isin(hottest, kept).mean())


def oracle_table(
    objects: np.ndarray, offsets: np.ndarray, layout: ObjectLayout, capacities: Iterable[int]
) -> pd.DataFrame:
    """One row per capacity, one hit-ratio column per unit."""
    rows = []
    for capacity in capacities:
        row = {"capacity_bytes": int(capacity)}
        for unit in UNITS:
            row[unit] = oracle_placement(objects, offsets, layout, unit, capacity)
        rows.append(row)
    LOG.info(f"oracle computed for {len(rows)} capacities over {len(objects)} accesses")
    return pd.DataFrame(rows, columns=["capacity_bytes", *UNITS])
