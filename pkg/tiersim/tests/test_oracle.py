"""Tests du placement oracle hors ligne et des mesures associees."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from tiersim.analyzers import (
    ObjectLayout,
    intrapage_skew,
    oracle_hit_mask,
    oracle_placement,
    oracle_table,
    sample_observability,
    trace_arrays,
)
from tiersim.analyzers.oracle import unit_keys
from tiersim.generators import KvWorkload, KvWorkloadSpec, build_kv_heap
from tiersim.generators.kv_workload import hot_key_count


def kv_trace(distribution, key_count=4000, events=200_000, seed=0):
    spec = KvWorkloadSpec(
        key_count=key_count,
        distribution=distribution,
        directory_access=False,
        background_fraction=0.0,
        seed=seed,
    )
    kv = build_kv_heap(spec, region_size=65536)
    objects, offsets = trace_arrays(KvWorkload(kv).events(limit=events))
    return kv, ObjectLayout.from_heap(kv.heap), objects, offsets


class TestGreedyFill:
    """Remplissage glouton par frequence decroissante."""

    def test_uniform_half(self):
        layout = ObjectLayout.contiguous(10, 256)
        objects = np.arange(10)
        assert oracle_placement(objects, np.zeros(10, dtype=np.int64), layout, "object", 5 * 256) == 0.5

    def test_single_unit(self):
        layout = ObjectLayout.contiguous(1, 256)
        objects = np.zeros(50, dtype=np.int64)
        offsets = np.zeros(50, dtype=np.int64)
        for unit in ("object", "page4k", "page2m"):
            capacity = 256 if unit == "object" else 2 * 1024 * 1024
            assert oracle_placement(objects, offsets, layout, unit, capacity) == 1.0

    def test_stops_at_first_misfit(self):
        layout = ObjectLayout(
            base=np.array([0, 1000, 2000]), size=np.array([1000, 100, 100]), large=np.zeros(3, dtype=bool)
        )
        objects = np.array([0, 0, 0, 1, 1, 2])
        mask = oracle_hit_mask(objects, np.zeros(6, dtype=np.int64), layout, "object", 150)
        # object 0 is the most accessed but does not fit, so nothing is admitted
        assert not mask.any()

    def test_empty_trace(self):
        layout = ObjectLayout.contiguous(1)
        empty = np.zeros(0, dtype=np.int64)
        assert oracle_placement(empty, empty, layout, "object", 1000) == 0.0

    def test_unknown_object(self):
        layout = ObjectLayout.contiguous(2)
        with pytest.raises(ValueError):
            oracle_hit_mask(np.array([5]), np.array([0]), layout, "object", 1000)

    def test_large_objects_are_paged(self):
        layout = ObjectLayout(
            base=np.array([0, 8192]), size=np.array([8192, 64]), large=np.array([True, False])
        )
        keys, sizes = unit_keys(np.array([0, 0, 1]), np.array([0, 5000, 0]), layout, "object")
        assert keys.tolist() == [2, 3, 1]
        assert sorted(sizes.tolist()) == [64, 4096, 4096]


class TestGranularity:
    """Ordre objet > 4 Ko > 2 Mo sur une charge Zipf."""

    def test_hotwarm_object_oracle(self):
        kv, layout, objects, offsets = kv_trace({"kind": "hotwarm", "hot_fraction": 0.2, "hot_mass": 0.9}, key_count=1000)
        hot_bytes = hot_key_count(1000, 0.2) * (64 + 256)
        assert abs(oracle_placement(objects, offsets, layout, "object", hot_bytes) - 0.9) <= 0.01

    def test_ordering_and_monotonicity(self):
        kv, layout, objects, offsets = kv_trace({"kind": "zipfian", "s": 0.99}, seed=3)
        previous = {"object": 0.0, "page4k": 0.0, "page2m": 0.0}
        for fraction in (0.1, 0.2, 0.5):
            capacity = int(fraction * kv.footprint)
            ratios = {unit: oracle_placement(objects, offsets, layout, unit, capacity) for unit in previous}
            assert ratios["object"] >= ratios["page4k"] >= ratios["page2m"]
            if fraction < 0.5:
                assert ratios["object"] - ratios["page4k"] >= 0.05
            for unit, value in ratios.items():
                assert value >= previous[unit]
            previous = ratios

    def test_table(self):
        kv, layout, objects, offsets = kv_trace({"kind": "uniform"}, key_count=500, events=5000)
        table = oracle_table(objects, offsets, layout, [1000, 10_000])
        assert list(table.columns) == ["capacity_bytes", "object", "page4k", "page2m"]
        assert len(table) == 2


class TestSkewAndObservability:
    def test_skew_of_unequal_page(self):
        layout = ObjectLayout.contiguous(2, 256)
        assert intrapage_skew(np.array([10, 0]), layout) == pytest.approx(1.0)

    def test_no_skew_when_equal(self):
        layout = ObjectLayout.contiguous(32, 256)
        assert intrapage_skew(np.full(32, 5), layout) == 0.0

    def test_skew_ignores_idle_pages(self):
        layout = ObjectLayout.contiguous(32, 256)
        counts = np.zeros(32, dtype=np.int64)
        counts[0] = 4
        counts[1] = 4
        assert intrapage_skew(counts, layout) == pytest.approx(np.std([4, 4] + [0] * 14) / 0.5)

    def test_full_rate_sees_everything(self):
        objects = np.array([1, 1, 1, 2, 3, 3])
        assert sample_observability(objects, 1.0, 1) == 1.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            sample_observability(np.array([1]), 0.0, 10)
        with pytest.raises(ValueError):
            sample_observability(np.array([1]), 0.5, 0)

    def test_sparse_sampling_still_sees_hot_objects(self):
        _, _, objects, _ = kv_trace({"kind": "zipfian"}, events=100_000)
        assert sample_observability(objects, 0.01, 20, seed=1) >= 0.9
