"""Fixtures partagees par les tests du simulateur."""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Dict

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from tiersim.config import build_scenario
from tiersim.heap import Heap

KiB = 1024


@pytest.fixture
def small_heap() -> Heap:
    """16 regions of 8 KB, 4 KB pages, invariants checked after every relocation batch."""
    return Heap(16 * 8 * KiB, region_size=8 * KiB, page_size=4 * KiB, check_invariants=True)


def desk_raw(**top: Any) -> Dict[str, Any]:
    """HotWarm scenario small enough to run in a few seconds."""
    raw: Dict[str, Any] = {
        "name": "desk",
        "policy": "clove",
        "seed": 7,
        "duration_events": 300_000,
        "metrics_window_events": 10_000,
        "workload": {
            "key_count": 4000,
            "value_size": 256,
            "directory_access": False,
            "distribution": {"kind": "hotwarm", "hot_fraction": 0.2, "hot_mass": 0.9},
        },
        "profiler": {"sample_rate": 10, "decay_window": 2500},
        "tier": {"page_size": 4096, "fast_fraction": 0.2},
        "heap": {"region_size": 65536, "min_spare_regions": 16},
    }
    raw.update(top)
    return raw


@pytest.fixture
def desk_scenario_raw() -> Dict[str, Any]:
    return desk_raw()


@pytest.fixture
def tiny_scenario():
    """A few thousand events; enough to cross several decay ticks and epochs."""
    return build_scenario(desk_raw(name="tiny", duration_events=60_000, metrics_window_events=5_000))
