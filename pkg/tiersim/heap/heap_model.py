from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple, Union

LOG = logging.getLogger(__name__)

KiB = 1024
MiB = 1024 * KiB
REGION_SIZE = 2 * MiB
SMALL_PAGE = 4 * KiB
HUGE_PAGE = 2 * MiB
# Anything larger than one small page is page-managed and never compacted.
LARGE_OBJECT_THRESHOLD = SMALL_PAGE

HOTNESS_SHIFT = 48
LOWER_MASK = (1 << HOTNESS_SHIFT) - 1
HOTNESS_MAX = 0xFFFF
WORD_MASK = (1 << 64) - 1


class SimulationError(Exception):
    """Base error for any inconsistent or impossible simulation step."""
    pass


class HeapCapacityError(SimulationError):
    """No free region is left to satisfy an allocation or evacuation."""
    pass


class RegionFullError(SimulationError):
    """Destination region cannot hold the object being relocated."""
    pass


class DanglingObjectError(SimulationError):
    """An access or relocation referenced an object id the heap does not know."""
    pass


class Designation(str, Enum):
    NORMAL = "normal"
    HOT_SPACE = "hot_space"


class ObjectHeader:
    """64-bit object header: 48 opaque low bits plus a 16-bit hotness counter on top.

    Hotness updates only ever touch the upper 16 bits; the low 48 bits stand for
    lock/class metadata and are written by `set_lower_bits` alone.
    """

    __slots__ = ("raw",)

    def __init__(self, raw: int = 0) -> None:
        self.raw = raw & WORD_MASK

    @classmethod
    def from_parts(cls, lower_bits: int, hotness: int = 0) -> "ObjectHeader":
        if not 0 <= hotness <= HOTNESS_MAX:
            raise ValueError(f"hotness out of range: {hotness}")
        return cls(((hotness & HOTNESS_MAX) << HOTNESS_SHIFT) | (lower_bits & LOWER_MASK))

    @property
    def lower_bits(self) -> int:
        return self.raw & LOWER_MASK

    @property
    def hotness(self) -> int:
        return self.raw >> HOTNESS_SHIFT

    def increment(self) -> bool:
        """Saturating increment; returns False when the counter is already at the limit."""
        if (self.raw >> HOTNESS_SHIFT) == HOTNESS_MAX:
            return False
        self.raw += 1 << HOTNESS_SHIFT
        return True

    def scale(self, ratio: float) -> int:
        """Multiply the counter by `ratio` with floor semantics and return the new value."""
        value = int((self.raw >> HOTNESS_SHIFT) * ratio)
        self.raw = (value << HOTNESS_SHIFT) | (self.raw & LOWER_MASK)
        return value

    def set_lower_bits(self, bits: int) -> None:
        self.raw = (self.raw & ~LOWER_MASK & WORD_MASK) | (bits & LOWER_MASK)

    def __repr__(self) -> str:
        return f"ObjectHeader(hotness={self.hotness}, lower=0x{self.lower_bits:012x})"


@dataclass(slots=True, eq=False)
class ObjectRecord:
    id: int
    size: int
    header: ObjectHeader
    region: int
    offset: int


@dataclass(slots=True, eq=False)
class LargeObject:
    id: int
    size: int
    header: ObjectHeader
    base_address: int
    page_span: List[int]


HeapObject = Union[ObjectRecord, LargeObject]


@dataclass(slots=True, eq=False)
class Region:
    id: int
    capacity: int
    designation: Designation = Designation.NORMAL
    live_bytes: int = 0
    hot_bytes: int = 0
    fill_cursor: int = 0
    # insertion-ordered set of member ids
    objects: Dict[int, None] = field(default_factory=dict)

    @property
    def free_bytes(self) -> int:
        return self.capacity - self.fill_cursor

    @property
    def base_address(self) -> int:
        return self.id * self.capacity

    @property
    def hot_ratio(self) -> float:
        return self.hot_bytes / self.live_bytes if self.live_bytes else 0.0


class Heap:
    """Region-based managed heap with bump allocation and object relocation.

    Regions are carved out of a flat, page-aligned address space: region `r` starts at
    `r * region_size`. Small objects live inside one region; large objects claim a run of
    whole regions and are placed once, never moved.
    """

    def __init__(
        self,
        capacity: int,
        region_size: int = REGION_SIZE,
        page_size: int = SMALL_PAGE,
        large_object_threshold: int = LARGE_OBJECT_THRESHOLD,
        check_invariants: bool = False,
    ) -> None:
        if region_size <= 0 or page_size <= 0:
            raise ValueError("region_size and page_size must be positive")
        if region_size % page_size and page_size % region_size:
            raise ValueError(
                f"region size {region_size} and page size {page_size} must divide one another"
            )
        region_count = capacity // region_size
        if region_count < 1:
            raise ValueError(f"heap capacity {capacity} is smaller than one region ({region_size})")
        self.capacity = region_count * region_size
        self.region_size = region_size
        self.page_size = page_size
        self.large_object_threshold = large_object_threshold
        self.check_invariants = check_invariants
        self.region_count = region_count

        self.regions: Dict[int, Region] = {}
        self.objects: Dict[int, ObjectRecord] = {}
        self.large_objects: Dict[int, LargeObject] = {}
        # start address of every live object, small or large
        self.base_address: Dict[int, int] = {}
        self._free_regions: List[int] = list(range(region_count))
        heapq.heapify(self._free_regions)
        self._large_regions: Dict[int, int] = {}
        self._targets: Dict[Designation, Optional[int]] = {d: None for d in Designation}
        self._next_id = 0

    # ------------------------------------------------------------------ queries

    def lookup(self, obj_id: int) -> HeapObject:
        obj = self.objects.get(obj_id)
        if obj is not None:
            return obj
        large = self.large_objects.get(obj_id)
        if large is None:
            raise DanglingObjectError(f"unknown object id {obj_id}")
        return large

    def address_of(self, obj: HeapObject, offset: int = 0) -> Tuple[int, int]:
        """Return `(page_id, in_page_offset)` of byte `offset` inside `obj`."""
        if isinstance(obj, LargeObject):
            address = obj.base_address + offset
        else:
            address = obj.region * self.region_size + obj.offset + offset
        return divmod(address, self.page_size)

    def address(self, obj_id: int, offset: int = 0) -> int:
        try:
            return self.base_address[obj_id] + offset
        except KeyError:
            raise DanglingObjectError(f"unknown object id {obj_id}") from None

    def page_of(self, obj_id: int, offset: int = 0) -> int:
        return self.address(obj_id, offset) // self.page_size

    def live_objects(self) -> Iterator[ObjectRecord]:
        return iter(self.objects.values())

    def regions_by(self, designation: Designation) -> List[Region]:
        return [r for r in self.regions.values() if r.designation is designation]

    @property
    def free_region_count(self) -> int:
        return len(self._free_regions)

    @property
    def live_small_bytes(self) -> int:
        return sum(r.live_bytes for r in self.regions.values())

    @property
    def live_large_bytes(self) -> int:
        return sum(o.size for o in self.large_objects.values())

    # --------------------------------------------------------------- allocation

    def allocate(self, size: int, region_class: Designation = Designation.NORMAL) -> HeapObject:
        """Bump-allocate an object into the current region of `region_class`."""
        if size <= 0:
            raise ValueError(f"allocation size must be positive, got {size}")
        region_class = Designation(region_class)
        if size > self.large_object_threshold:
            return self._allocate_large(size)
        region = self._target_for(region_class, size)
        obj = ObjectRecord(
            id=self._new_id(),
            size=size,
            header=ObjectHeader(),
            region=region.id,
            offset=region.fill_cursor,
        )
        self._place(obj, region)
        self.objects[obj.id] = obj
        return obj

    def _allocate_large(self, size: int) -> LargeObject:
        span = -(-size // self.region_size)
        start = self._claim_contiguous(span)
        base = start * self.region_size
        for rid in range(start, start + span):
            self._large_regions[rid] = self._next_id
        first_page = base // self.page_size
        last_page = (base + size - 1) // self.page_size
        obj = LargeObject(
            id=self._new_id(),
            size=size,
            header=ObjectHeader(),
            base_address=base,
            page_span=list(range(first_page, last_page + 1)),
        )
        self.large_objects[obj.id] = obj
        self.base_address[obj.id] = base
        return obj

    def _claim_contiguous(self, span: int) -> int:
        free = sorted(self._free_regions)
        run_start, run_len = None, 0
        for rid in free:
            if run_start is not None and rid == run_start + run_len:
                run_len += 1
            else:
                run_start, run_len = rid, 1
            if run_len == span:
                claimed = set(range(run_start, run_start + span))
                self._free_regions = [r for r in self._free_regions if r not in claimed]
                heapq.heapify(self._free_regions)
                return run_start
        raise HeapCapacityError(
            f"heap capacity exceeded: no run of {span} free regions "
            f"({len(self._free_regions)} free of {self.region_count})"
        )

    def _new_id(self) -> int:
        obj_id = self._next_id
        self._next_id += 1
        return obj_id

    def open_region(self, designation: Designation) -> Region:
        if not self._free_regions:
            raise HeapCapacityError(
                f"heap capacity exceeded: all {self.region_count} regions in use "
                f"({self.live_small_bytes} live small bytes, {self.live_large_bytes} large bytes)"
            )
        rid = heapq.heappop(self._free_regions)
        region = Region(id=rid, capacity=self.region_size, designation=designation)
        self.regions[rid] = region
        LOG.debug(f"opened {designation.value} region {rid}")
        return region

    def _target_for(self, designation: Designation, size: int) -> Region:
        rid = self._targets[designation]
        region = self.regions.get(rid) if rid is not None else None
        if region is None or region.free_bytes < size:
            region = self.open_region(designation)
            self._targets[designation] = region.id
        return region

    def current_target(self, designation: Designation) -> Optional[int]:
        return self._targets[designation]

    def needs_new_region(self, designation: Designation, size: int) -> bool:
        """True when the next `size`-byte placement into `designation` opens a region."""
        rid = self._targets[Designation(designation)]
        region = self.regions.get(rid) if rid is not None else None
        return region is None or region.free_bytes < size

    def ensure_room(self, size: int, region_class: Designation = Designation.NORMAL) -> Region:
        """Make the next `size` bytes of `region_class` allocations land in one region."""
        if size > self.region_size:
            raise ValueError(f"group of {size} B cannot fit a {self.region_size} B region")
        return self._target_for(Designation(region_class), size)

    def retire_target(self, region_id: int) -> None:
        """Stop bump-allocating into `region_id`; the next allocation opens a fresh region."""
        for designation, rid in self._targets.items():
            if rid == region_id:
                self._targets[designation] = None

    def _place(self, obj: ObjectRecord, region: Region) -> None:
        obj.region = region.id
        obj.offset = region.fill_cursor
        region.fill_cursor += obj.size
        region.live_bytes += obj.size
        region.objects[obj.id] = None
        self.base_address[obj.id] = region.id * self.region_size + obj.offset

    # --------------------------------------------------------------- relocation

    def relocate(self, obj: HeapObject, dest_region: Region) -> ObjectRecord:
        """Move a small object to the fill cursor of `dest_region`, keeping id and header."""
        if isinstance(obj, LargeObject):
            raise SimulationError(f"large object {obj.id} ({obj.size} B) is never relocated")
        if self.objects.get(obj.id) is not obj:
            raise DanglingObjectError(f"object {obj.id} is not live in this heap")
        if dest_region.id == obj.region:
            raise SimulationError(f"object {obj.id} already resides in region {dest_region.id}")
        if dest_region.free_bytes < obj.size:
            raise RegionFullError(
                f"region {dest_region.id} has {dest_region.free_bytes} free bytes, "
                f"object {obj.id} needs {obj.size}"
            )
        source = self.regions[obj.region]
        source.live_bytes -= obj.size
        del source.objects[obj.id]
        self._place(obj, dest_region)
        return obj

    def evacuate(self, obj: ObjectRecord, designation: Designation) -> ObjectRecord:
        """Relocate into the current destination of `designation`, opening regions as needed."""
        return self.relocate(obj, self._target_for(designation, obj.size))

    def free(self, obj_id: int) -> None:
        """Drop an object; its bytes stay dead in the region until the region is evacuated."""
        obj = self.objects.pop(obj_id, None)
        if obj is None:
            if self.large_objects.pop(obj_id, None) is None:
                raise DanglingObjectError(f"unknown object id {obj_id}")
            for rid in [r for r, o in self._large_regions.items() if o == obj_id]:
                del self._large_regions[rid]
                heapq.heappush(self._free_regions, rid)
            del self.base_address[obj_id]
            return
        region = self.regions[obj.region]
        region.live_bytes -= obj.size
        del region.objects[obj_id]
        del self.base_address[obj_id]

    def release_region(self, region_id: int) -> None:
        region = self.regions[region_id]
        if region.live_bytes:
            raise SimulationError(
                f"region {region_id} still holds {region.live_bytes} live bytes"
            )
        del self.regions[region_id]
        self.retire_target(region_id)
        heapq.heappush(self._free_regions, region_id)

    def reclaim_empty_regions(self) -> int:
        """Return every empty, non-target region to the free pool."""
        targets = {rid for rid in self._targets.values() if rid is not None}
        empty = [r.id for r in self.regions.values() if r.live_bytes == 0 and r.id not in targets]
        for rid in empty:
            self.release_region(rid)
        return len(empty)

    # ---------------------------------------------------------------- checking

    def verify(self) -> None:
        """Check byte accounting and non-overlap; raise SimulationError on the first violation."""
        object_bytes = sum(o.size for o in self.objects.values())
        region_bytes = self.live_small_bytes
        if object_bytes != region_bytes:
            raise SimulationError(
                f"accounting drift: regions report {region_bytes} live bytes, objects sum to {object_bytes}"
            )
        for region in self.regions.values():
            if not 0 <= region.live_bytes <= region.fill_cursor <= region.capacity:
                raise SimulationError(f"region {region.id} bounds broken: {region}")
            members = sorted((self.objects[i] for i in region.objects), key=lambda o: o.offset)
            if sum(o.size for o in members) != region.live_bytes:
                raise SimulationError(f"region {region.id} live bytes disagree with its members")
            end = 0
            for obj in members:
                if obj.region != region.id:
                    raise SimulationError(f"object {obj.id} listed in region {region.id} but points to {obj.region}")
                if obj.offset < end:
                    raise SimulationError(f"object {obj.id} overlaps its predecessor in region {region.id}")
                end = obj.offset + obj.size
            if end > region.capacity:
                raise SimulationError(f"region {region.id} overflows its capacity")

    def maybe_verify(self) -> None:
        if self.check_invariants:
            self.verify()


def heap_capacity_for(footprint: int, region_size: int = REGION_SIZE, min_spare_regions: int = 4) -> int:
    """Heap sized 20 % above the footprint, with a floor of `min_spare_regions` free regions."""
    def roundup(value: float) -> int:
        return -(-int(value) // region_size) * region_size

    return max(roundup(footprint * 1.2 + 0.5), roundup(footprint) + min_spare_regions * region_size)
