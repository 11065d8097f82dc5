"""Tests du modele de tas par regions."""
from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from tiersim.heap import (
    DanglingObjectError,
    Designation,
    Heap,
    HeapCapacityError,
    LargeObject,
    ObjectHeader,
    RegionFullError,
    SimulationError,
    heap_capacity_for,
)
from tiersim.heap.heap_model import HOTNESS_MAX, LOWER_MASK

KiB = 1024


class TestObjectHeader:
    """Compteur 16 bits dans les bits hauts de l'en-tete."""

    def test_from_parts(self):
        header = ObjectHeader.from_parts(0xABCDEF, hotness=5)
        assert header.hotness == 5
        assert header.lower_bits == 0xABCDEF

    def test_increment_saturates(self):
        header = ObjectHeader.from_parts(0x1234, hotness=HOTNESS_MAX - 1)
        assert header.increment() is True
        assert header.hotness == HOTNESS_MAX
        assert header.increment() is False
        assert header.hotness == HOTNESS_MAX
        assert header.lower_bits == 0x1234

    def test_scale_floors(self):
        header = ObjectHeader.from_parts(7, hotness=7)
        assert header.scale(0.5) == 3
        assert header.hotness == 3
        assert header.lower_bits == 7

    def test_rejects_out_of_range_hotness(self):
        with pytest.raises(ValueError):
            ObjectHeader.from_parts(0, hotness=HOTNESS_MAX + 1)


class TestAllocation:
    """Allocation par pointeur de remplissage."""

    def test_bump_allocation_is_contiguous(self, small_heap):
        a = small_heap.allocate(100)
        b = small_heap.allocate(200)
        assert a.region == b.region
        assert b.offset == a.offset + a.size
        assert small_heap.address(b.id) == small_heap.address(a.id) + 100

    def test_new_region_when_full(self, small_heap):
        first = small_heap.allocate(4000)
        second = small_heap.allocate(4000)
        third = small_heap.allocate(1000)
        assert first.region == second.region
        assert third.region != first.region
        assert third.offset == 0

    def test_large_object_gets_whole_regions(self, small_heap):
        big = small_heap.allocate(10 * KiB)
        assert isinstance(big, LargeObject)
        assert big.base_address % small_heap.region_size == 0
        # 10 KB spans three 4 KB pages
        assert len(big.page_span) == 3
        assert big.id in small_heap.large_objects
        assert big.id not in small_heap.objects

    def test_capacity_exceeded(self):
        heap = Heap(2 * 8 * KiB, region_size=8 * KiB, page_size=4 * KiB)
        heap.allocate(4096)
        heap.allocate(4096)
        heap.allocate(4096)
        heap.allocate(4096)
        with pytest.raises(HeapCapacityError):
            heap.allocate(16)

    def test_ensure_room_keeps_groups_together(self, small_heap):
        small_heap.allocate(4000)
        small_heap.allocate(4000)
        region = small_heap.ensure_room(320)
        meta = small_heap.allocate(64)
        value = small_heap.allocate(256)
        assert meta.region == value.region == region.id

    def test_ensure_room_rejects_oversized_group(self, small_heap):
        with pytest.raises(ValueError):
            small_heap.ensure_room(9 * KiB)

    def test_page_of_uses_offset(self, small_heap):
        obj = small_heap.allocate(4000)
        other = small_heap.allocate(3000)
        assert small_heap.page_of(other.id) == 0
        assert small_heap.page_of(other.id, offset=2000) == 1
        assert small_heap.address_of(obj, 10) == (0, 10)

    def test_dangling_lookup(self, small_heap):
        with pytest.raises(DanglingObjectError):
            small_heap.lookup(999)
        with pytest.raises(DanglingObjectError):
            small_heap.page_of(999)

    def test_capacity_formula(self):
        region = 64 * KiB
        # small footprint: the spare-region floor wins
        assert heap_capacity_for(10 * region, region, 4) == 14 * region
        # large footprint: 20 % headroom wins
        assert heap_capacity_for(100 * region, region, 4) == 120 * region


class TestRelocation:
    """Deplacement d'objets: identite et en-tete conserves."""

    def test_relocate_keeps_identity_and_header(self, small_heap):
        obj = small_heap.allocate(128)
        obj.header = ObjectHeader.from_parts(0xBEEF, hotness=9)
        dest = small_heap.open_region(Designation.HOT_SPACE)
        moved = small_heap.relocate(obj, dest)
        assert moved is obj
        assert moved.region == dest.id
        assert moved.header.hotness == 9
        assert moved.header.lower_bits == 0xBEEF
        assert small_heap.lookup(obj.id) is obj
        small_heap.verify()

    def test_relocate_updates_live_bytes(self, small_heap):
        obj = small_heap.allocate(128)
        source = small_heap.regions[obj.region]
        dest = small_heap.open_region(Designation.HOT_SPACE)
        small_heap.relocate(obj, dest)
        assert source.live_bytes == 0
        assert source.fill_cursor == 128
        assert dest.live_bytes == 128

    def test_relocate_to_full_region(self, small_heap):
        obj = small_heap.allocate(128)
        dest = small_heap.open_region(Designation.HOT_SPACE)
        dest.fill_cursor = dest.capacity - 64
        with pytest.raises(RegionFullError):
            small_heap.relocate(obj, dest)

    def test_large_objects_never_move(self, small_heap):
        big = small_heap.allocate(10 * KiB)
        dest = small_heap.open_region(Designation.HOT_SPACE)
        with pytest.raises(SimulationError):
            small_heap.relocate(big, dest)

    def test_evacuate_opens_destinations(self, small_heap):
        objs = [small_heap.allocate(1000) for _ in range(10)]
        for obj in objs:
            small_heap.evacuate(obj, Designation.HOT_SPACE)
        hot = small_heap.regions_by(Designation.HOT_SPACE)
        assert len(hot) == 2
        assert sum(r.live_bytes for r in hot) == 10_000
        small_heap.verify()

    def test_release_and_reclaim(self, small_heap):
        obj = small_heap.allocate(128)
        rid = obj.region
        small_heap.evacuate(obj, Designation.HOT_SPACE)
        hot_rid = small_heap.current_target(Designation.HOT_SPACE)
        with pytest.raises(SimulationError):
            small_heap.release_region(hot_rid)
        small_heap.retire_target(rid)
        assert small_heap.reclaim_empty_regions() == 1
        assert rid not in small_heap.regions

    def test_needs_new_region(self, small_heap):
        assert small_heap.needs_new_region(Designation.HOT_SPACE, 16)
        small_heap.open_region(Designation.HOT_SPACE)
        assert small_heap.needs_new_region(Designation.HOT_SPACE, 16)
        obj = small_heap.allocate(64)
        small_heap.evacuate(obj, Designation.HOT_SPACE)
        assert not small_heap.needs_new_region(Designation.HOT_SPACE, 16)
        assert small_heap.needs_new_region(Designation.HOT_SPACE, 8 * KiB)

    def test_free_leaves_dead_bytes(self, small_heap):
        obj = small_heap.allocate(128)
        region = small_heap.regions[obj.region]
        small_heap.free(obj.id)
        assert region.live_bytes == 0
        assert region.fill_cursor == 128
        with pytest.raises(DanglingObjectError):
            small_heap.free(obj.id)


@settings(max_examples=50, deadline=None)
@given(
    sizes=st.lists(st.integers(min_value=8, max_value=2048), min_size=1, max_size=40),
    lower=st.integers(min_value=0, max_value=LOWER_MASK),
    moves=st.lists(st.integers(min_value=0, max_value=39), max_size=60),
)
def test_relocation_preserves_headers_and_accounting(sizes, lower, moves):
    heap = Heap(64 * 8 * KiB, region_size=8 * KiB, page_size=4 * KiB)
    objs = [heap.allocate(size) for size in sizes]
    for i, obj in enumerate(objs):
        obj.header = ObjectHeader.from_parts(lower ^ i, hotness=i % 100)
    for idx in moves:
        obj = objs[idx % len(objs)]
        in_hot = heap.regions[obj.region].designation is Designation.HOT_SPACE
        heap.evacuate(obj, Designation.NORMAL if in_hot else Designation.HOT_SPACE)
    heap.verify()
    for i, obj in enumerate(objs):
        assert heap.lookup(obj.id) is obj
        assert obj.header.lower_bits == (lower ^ i) & LOWER_MASK
        assert obj.header.hotness == i % 100
