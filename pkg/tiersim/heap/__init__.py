"""Managed-heap model: headers, regions, allocation and relocation."""
from .heap_model import (
    Designation,
    DanglingObjectError,
    Heap,
    HeapCapacityError,
    LargeObject,
    ObjectHeader,
    ObjectRecord,
    Region,
    RegionFullError,
    SimulationError,
    heap_capacity_for,
)

__all__ = [
    "Designation",
    "DanglingObjectError",
    "Heap",
    "HeapCapacityError",
    "LargeObject",
    "ObjectHeader",
    "ObjectRecord",
    "Region",
    "RegionFullError",
    "SimulationError",
    "heap_capacity_for",
]
