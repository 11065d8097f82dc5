from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..heap import Designation, Heap, HeapCapacityError, ObjectRecord, Region, SimulationError

LOG = logging.getLogger(__name__)

NUM_BINS = 16
PhaseKind = Literal["piggyback", "dedicated"]


class CompactionError(SimulationError):
    """Relocation ran out of destination regions."""
    pass


class CompactionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    low_watermark: float = Field(0.05, ge=0, le=1)
    high_watermark: float = Field(0.50, ge=0, le=1)
    min_regions: int = Field(1, ge=1)
    # a normal GC pass runs on every `normal_every`-th refresh scan
    normal_every: int = Field(2, ge=1)
    # share of the fast tier the cutoff may fill
    budget_fraction: float = Field(1.0, gt=0, le=1)
    gc_regions_per_pass: int = Field(2, ge=0)
    relocation_bandwidth: float = Field(1e9, gt=0)
    # free regions a phase leaves untouched; 0 turns exhaustion into an error
    reserve_regions: int = Field(2, ge=0)

    @model_validator(mode="after")
    def _check_watermarks(self) -> "CompactionConfig":
        if self.low_watermark > self.high_watermark:
            raise ValueError(
                f"low_watermark {self.low_watermark} is above high_watermark {self.high_watermark}"
            )
        return self


@dataclass
class HotnessHistogram:
    """Bytes of live small objects per exponential counter bin: bin i holds [2^i, 2^(i+1))."""

    bins: List[int] = field(default_factory=lambda: [0] * NUM_BINS)

    @staticmethod
    def bin_of(counter: int) -> Optional[int]:
        if counter <= 0:
            return None
        return min(counter.bit_length() - 1, NUM_BINS - 1)

    def add(self, counter: int, size: int) -> None:
        idx = self.bin_of(counter)
        if idx is not None:
            self.bins[idx] += size

    @property
    def total_bytes(self) -> int:
        return sum(self.bins)

    def is_empty(self) -> bool:
        return not any(self.bins)


@dataclass(frozen=True)
class CutoffDecision:
    cutoff_bin: Optional[int]
    min_hotness: int
    budget: int = 0

    def is_hot(self, counter: int) -> bool:
        return counter >= 1 and counter >= self.min_hotness

    @classmethod
    def everything(cls, budget: int = 0) -> "CutoffDecision":
        """No cutoff at all: every object with a non-zero counter is hot."""
        return cls(cutoff_bin=None, min_hotness=1, budget=budget)


@dataclass
class ScanResult:
    histogram: HotnessHistogram
    cutoff: CutoffDecision
    region_hot_bytes: Dict[int, int]
    live_bytes: int


@dataclass
class RegionSelection:
    low: float
    high: float
    selected: List[int]
    ratios: Dict[int, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.selected)


@dataclass
class RelocationReport:
    time_ns: int
    kind: str
    scanned_regions: int = 0
    selected_regions: int = 0
    moved_objects: int = 0
    moved_bytes: int = 0
    cold_moved_objects: int = 0
    cold_moved_bytes: int = 0
    demoted_objects: int = 0
    demoted_bytes: int = 0
    gc_hot_moved_objects: int = 0
    gc_hot_moved_bytes: int = 0
    freed_regions: int = 0
    selected_hot_bytes: int = 0
    min_source_ratio: Optional[float] = None
    max_source_ratio: Optional[float] = None
    truncated: bool = False

    @property
    def total_bytes(self) -> int:
        return self.moved_bytes + self.cold_moved_bytes + self.demoted_bytes + self.gc_hot_moved_bytes

    def as_row(self) -> Dict[str, object]:
        row = asdict(self)
        row["total_bytes"] = self.total_bytes
        return row


def compute_cutoff(histogram: HotnessHistogram, fast_budget: int) -> CutoffDecision:
    """Walk bins from the hottest down; the first bin that overflows the budget and
    everything below it are cold."""
    if fast_budget < 0:
        raise ValueError(f"fast budget must be >= 0, got {fast_budget}")
    cumulative = 0
    for idx in range(NUM_BINS - 1, -1, -1):
        cumulative += histogram.bins[idx]
        if cumulative > fast_budget:
            # bin 15 overflowing leaves a threshold no 16-bit counter reaches
            return CutoffDecision(cutoff_bin=idx, min_hotness=1 << (idx + 1), budget=fast_budget)
    return CutoffDecision(cutoff_bin=None, min_hotness=1, budget=fast_budget)


def scan_object_graph(
    heap: Heap,
    cutoff: Optional[CutoffDecision] = None,
    budget: Optional[int] = None,
) -> ScanResult:
    """Build the histogram over live small objects and refresh every region's hot bytes.

    Hot bytes are judged against `cutoff` when given, otherwise against a cutoff
    computed from this scan's own histogram and `budget`.
    """
    histogram = HotnessHistogram()
    live = 0
    for obj in heap.objects.values():
        histogram.add(obj.header.hotness, obj.size)
        live += obj.size
    if cutoff is None:
        if budget is None:
            raise ValueError("scan_object_graph needs either a cutoff or a budget")
        cutoff = compute_cutoff(histogram, budget)

    hot_bytes: Dict[int, int] = {}
    for region in heap.regions.values():
        total = 0
        for obj_id in region.objects:
            obj = heap.objects[obj_id]
            if cutoff.is_hot(obj.header.hotness):
                total += obj.size
        region.hot_bytes = total
        hot_bytes[region.id] = total
    return ScanResult(histogram=histogram, cutoff=cutoff, region_hot_bytes=hot_bytes, live_bytes=live)


def select_regions(regions: Iterable[Region], low: float, high: float) -> RegionSelection:
    """Normal, non-empty regions whose hot-byte ratio lies in the closed [low, high] band."""
    selected: List[int] = []
    ratios: Dict[int, float] = {}
    for region in regions:
        if region.designation is not Designation.NORMAL or region.live_bytes == 0:
            continue
        ratio = region.hot_bytes / region.live_bytes
        if low <= ratio <= high:
            selected.append(region.id)
            ratios[region.id] = ratio
    selected.sort()
    return RegionSelection(low=low, high=high, selected=selected, ratios=ratios)


def maybe_trigger_dedicated_phase(selection: RegionSelection, min_regions: int = 1) -> bool:
    return len(selection.selected) >= min_regions


def compact(
    heap: Heap,
    cutoff: CutoffDecision,
    selection: RegionSelection,
    kind: PhaseKind = "dedicated",
    gc_regions: int = 0,
    now: int = 0,
    reserve: int = 0,
) -> RelocationReport:
    """Relocate hot objects out of the selected regions into hot space.

    A dedicated phase moves hot objects only. A piggyback (normal GC) pass evacuates the
    selected regions entirely, sending cold objects to the normal destination, then
    demotes objects that fell below the cutoff out of hot space and evacuates up to
    `gc_regions` of the most fragmented remaining normal regions. Hot objects found in
    those GC-only sources are counted in `gc_hot_moved_*`, never in `moved_*`; hot-space
    regions are never a source.

    With `reserve` > 0 the phase stops early (report.truncated) rather than leave fewer
    than `reserve` free regions; with 0 running out of regions raises CompactionError.
    """
    ratios = [selection.ratios[r] for r in selection.selected if r in selection.ratios]
    report = RelocationReport(
        time_ns=now,
        kind=kind,
        scanned_regions=len(heap.regions),
        selected_regions=len(selection.selected),
        selected_hot_bytes=sum(
            heap.regions[r].hot_bytes for r in selection.selected if r in heap.regions
        ),
        min_source_ratio=min(ratios) if ratios else None,
        max_source_ratio=max(ratios) if ratios else None,
    )
    sources = [heap.regions[rid] for rid in selection.selected if rid in heap.regions]
    try:
        try:
            _promote(heap, sources, cutoff, report, reserve)
            if kind == "piggyback":
                for region in sources:
                    _evacuate_region(heap, region, cutoff, report, reserve)
                try:
                    _demote(heap, cutoff, report, reserve)
                except _HeadroomExhausted:
                    report.truncated = True
                for region in _most_fragmented(heap, gc_regions, exclude=set(selection.selected)):
                    _evacuate_region(heap, region, cutoff, report, reserve, gc_only=True)
        except _HeadroomExhausted:
            report.truncated = True
        if kind == "piggyback":
            report.freed_regions += heap.reclaim_empty_regions()
    except HeapCapacityError as exc:
        raise CompactionError(f"{kind} relocation ran out of regions: {exc}") from exc
    heap.maybe_verify()
    if report.truncated:
        LOG.warning(f"{kind} phase at t={now} stopped early: {heap.free_region_count} free regions left")
    LOG.info(
        f"{kind} phase at t={now}: {report.selected_regions} regions selected, "
        f"{report.moved_bytes} hot B moved, {report.cold_moved_bytes} cold B, "
        f"{report.demoted_bytes} demoted B, {report.gc_hot_moved_bytes} hot B from GC regions, "
        f"{report.freed_regions} regions freed"
    )
    return report


class _HeadroomExhausted(Exception):
    pass


def _move(heap: Heap, obj: ObjectRecord, designation: Designation, reserve: int) -> None:
    if reserve and heap.free_region_count <= reserve and heap.needs_new_region(designation, obj.size):
        raise _HeadroomExhausted()
    heap.evacuate(obj, designation)


def _promote(
    heap: Heap, sources: List[Region], cutoff: CutoffDecision, report: RelocationReport, reserve: int
) -> None:
    # sources in selection order, members in placement order
    hot = [
        heap.objects[obj_id]
        for region in sources
        for obj_id in list(region.objects)
        if cutoff.is_hot(heap.objects[obj_id].header.hotness)
    ]
    for obj in hot:
        _move(heap, obj, Designation.HOT_SPACE, reserve)
        report.moved_objects += 1
        report.moved_bytes += obj.size


def _evacuate_region(
    heap: Heap,
    region: Region,
    cutoff: CutoffDecision,
    report: RelocationReport,
    reserve: int,
    gc_only: bool = False,
) -> None:
    # a full evacuation may open one hot and one normal destination before the source frees
    if reserve and heap.free_region_count < max(2, reserve):
        raise _HeadroomExhausted()
    heap.retire_target(region.id)
    # members in placement order, i.e. ascending offset
    for obj_id in list(region.objects):
        obj = heap.objects[obj_id]
        if cutoff.is_hot(obj.header.hotness):
            heap.evacuate(obj, Designation.HOT_SPACE)
            if gc_only:
                report.gc_hot_moved_objects += 1
                report.gc_hot_moved_bytes += obj.size
            else:
                report.moved_objects += 1
                report.moved_bytes += obj.size
        else:
            heap.evacuate(obj, Designation.NORMAL)
            report.cold_moved_objects += 1
            report.cold_moved_bytes += obj.size
    heap.release_region(region.id)
    report.freed_regions += 1


def _demote(heap: Heap, cutoff: CutoffDecision, report: RelocationReport, reserve: int) -> None:
    for region in heap.regions_by(Designation.HOT_SPACE):
        for obj_id in list(region.objects):
            obj = heap.objects[obj_id]
            if not cutoff.is_hot(obj.header.hotness):
                _move(heap, obj, Designation.NORMAL, reserve)
                report.demoted_objects += 1
                report.demoted_bytes += obj.size


def _most_fragmented(heap: Heap, limit: int, exclude: set) -> List[Region]:
    if limit <= 0:
        return []
    candidates = [
        r for r in heap.regions.values()
        if r.designation is Designation.NORMAL
        and r.id not in exclude
        and r.live_bytes
        and r.fill_cursor > r.live_bytes
    ]
    candidates.sort(key=lambda r: (-(r.fill_cursor - r.live_bytes), r.id))
    return candidates[:limit]


def hot_space_density(heap: Heap, cutoff: CutoffDecision) -> float:
    """Mean share of hot bytes in hot-space regions (by fill cursor)."""
    regions = heap.regions_by(Designation.HOT_SPACE)
    if not regions:
        return 0.0
    densities = []
    for region in regions:
        hot = sum(
            heap.objects[i].size for i in region.objects
            if cutoff.is_hot(heap.objects[i].header.hotness)
        )
        densities.append(hot / region.fill_cursor if region.fill_cursor else 0.0)
    return sum(densities) / len(densities)

