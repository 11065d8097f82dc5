from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional, Tuple, TypedDict

from .analyzers.oracle import ObjectLayout, oracle_hit_mask, trace_arrays
from .analyzers.profiler import Profiler, SiteRow, SiteKey
from .compaction.hot_compaction import (
    CutoffDecision,
    RelocationReport,
    compact,
    hot_space_density,
    maybe_trigger_dedicated_phase,
    scan_object_graph,
    select_regions,
)
from .config import ScenarioConfig, check_invariants_env, build_scenario
from .detectors.hotness_tracker import HotnessTracker
from .generators.kv_workload import AccessEvent, KvWorkload, build_kv_heap
from .generators.trace_replay import replay_trace
from .heap import Designation
from .tiering.page_tier import LineCacheFilter, MigrationReport, TierState, fast_capacity_for

LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"

ORACLE_UNITS = {"oracle_object": "object", "oracle_4k": "page4k", "oracle_2m": "page2m"}
TRACKING_POLICIES = ("clove", "clove_no_cutoff", "clove_one_shot")

EventSink = Callable[[AccessEvent], None]


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


class TimelineRow(TypedDict):
    window: int
    time_ns: int
    events: int
    misses: int
    fast_hit_ratio: float
    amat_ns: float
    moved_bytes_object: int
    moved_bytes_page: int
    tracked_increments: int
    delinquent_set_size: int
    hot_space_bytes: int


class HistogramRow(TypedDict):
    time_ns: int
    scan: int
    bin: int
    min_counter: int
    bytes: int


@dataclass
class SimulationResult:
    scenario: ScenarioConfig
    timeline: List[TimelineRow] = field(default_factory=list)
    relocations: List[RelocationReport] = field(default_factory=list)
    migrations: List[MigrationReport] = field(default_factory=list)
    histograms: List[HistogramRow] = field(default_factory=list)
    profiler_sites: List[SiteRow] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)
    # (time_ns, object, page, fast) per miss event, only when requested
    event_log: Optional[List[Tuple[int, int, int, bool]]] = None


def amat(hit_ratio: float, fast_ns: float, slow_ns: float) -> float:
    """Average memory access time of a two-tier memory."""
    if not 0.0 <= hit_ratio <= 1.0:
        raise ValueError(f"hit ratio must be in [0, 1], got {hit_ratio}")
    if fast_ns <= 0 or slow_ns < fast_ns:
        raise ValueError(f"latencies must satisfy 0 < fast <= slow, got ({fast_ns}, {slow_ns})")
    return hit_ratio * fast_ns + (1.0 - hit_ratio) * slow_ns


def steady_state(values: List[float]) -> float:
    """Mean over the final third of the run (at least one value)."""
    if not values:
        return 0.0
    tail = values[len(values) - max(1, len(values) // 3):]
    return sum(tail) / len(tail)


class Simulation:
    """Event loop wiring workload, memory tiers, profiler, tracker and compaction."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        event_sink: Optional[EventSink] = None,
        event_log: bool = False,
    ) -> None:
        self.scenario = scenario
        self.event_sink = event_sink
        heap_cfg = scenario.heap
        self.kv = build_kv_heap(
            scenario.workload,
            region_size=heap_cfg.region_size,
            page_size=scenario.tier.page_size,
            large_object_threshold=heap_cfg.large_object_threshold,
            min_spare_regions=heap_cfg.min_spare_regions,
            check_invariants=heap_cfg.check_invariants or check_invariants_env(),
        )
        self.heap = self.kv.heap
        self.workload = KvWorkload(self.kv)
        self.fast_capacity = fast_capacity_for(self.kv.footprint, scenario.tier.fast_fraction)
        self.budget = int(scenario.compaction.budget_fraction * self.fast_capacity)
        self.tier = TierState(scenario.tier.page_size, self.fast_capacity, scenario.tier.migration_bandwidth)
        self.profiler = Profiler(scenario.profiler)
        self.tracker = HotnessTracker(self.heap, scenario.tracker)
        self.line_cache = LineCacheFilter(scenario.line_cache_lines) if scenario.line_cache_lines else None
        self.delinquent: FrozenSet[SiteKey] = frozenset()
        self.last_cutoff: Optional[CutoffDecision] = None
        self.tracks_objects = scenario.policy in TRACKING_POLICIES
        self.compaction_enabled = self.tracks_objects
        self.result = SimulationResult(scenario=scenario, event_log=[] if event_log else None)

        self.scans = 0
        self.total_misses = 0
        self.total_hits = 0
        self.total_events = 0
        self._samples_since_epoch = 0
        self._window_index = 0
        self._win_events = 0
        self._win_misses = 0
        self._win_hits = 0
        self._win_moved_object = 0
        self._win_moved_page = 0
        self._win_increments_base = 0
        self.profiler.add_decay_listener(self._on_decay)

    # ------------------------------------------------------------- sources

    def _events(self) -> Iterator[AccessEvent]:
        limit = self.scenario.duration_events
        if self.scenario.trace:
            return itertools.islice(replay_trace(self.scenario.trace), limit)
        return self.workload.events(limit=limit)

    # ---------------------------------------------------------------- loop

    def run(self) -> SimulationResult:
        sc = self.scenario
        LOG.info(
            f"scenario {sc.name!r}: policy={sc.policy}, {sc.duration_events} events, "
            f"fast capacity {self.fast_capacity} B of footprint {self.kv.footprint} B"
        )
        if sc.policy in ORACLE_UNITS:
            self._run_oracle(ORACLE_UNITS[sc.policy])
        else:
            self._run_online()
        self._finish()
        LOG.info(
            f"scenario {sc.name!r} done: steady hit ratio {self.result.summary['steady_hit_ratio']:.4f}"
        )
        return self.result

    def _run_online(self) -> None:
        heap = self.heap
        tier = self.tier
        profiler = self.profiler
        tracker = self.tracker
        line_cache = self.line_cache
        sink = self.event_sink
        log = self.result.event_log
        window = self.scenario.metrics_window_events
        epoch_samples = self.scenario.epoch_samples
        tracks = self.tracks_objects
        last_time = 0

        for ev in self._events():
            last_time = ev.time
            if sink is not None:
                sink(ev)
            self.total_events += 1
            self._win_events += 1
            if line_cache is not None and line_cache.access(heap.address(ev.object, ev.offset)):
                # served by the cache: the instrumented load still runs
                if tracks:
                    tracker.on_access(ev, self.delinquent)
            else:
                page = heap.page_of(ev.object, ev.offset)
                hit = page in tier.fast
                self.total_misses += 1
                self._win_misses += 1
                if hit:
                    self.total_hits += 1
                    self._win_hits += 1
                if log is not None:
                    log.append((ev.time, ev.object, page, hit))
                if tracks:
                    tracker.on_access(ev, self.delinquent)
                if profiler.sample(ev) is not None:
                    tier.record_page_sample(page)
                    self._samples_since_epoch += 1
                    if self._samples_since_epoch >= epoch_samples:
                        self._epoch(ev.time)
            if self._win_events >= window:
                self._close_window(ev.time)
        if self._win_events:
            self._close_window(last_time)

    def _run_oracle(self, unit: str) -> None:
        events = list(self._events())
        if self.event_sink is not None:
            for ev in events:
                self.event_sink(ev)
        objects, offsets = trace_arrays(events)
        layout = ObjectLayout.from_heap(self.heap)
        mask = oracle_hit_mask(objects, offsets, layout, unit, self.fast_capacity)
        log = self.result.event_log
        if log is not None:
            for ev, hit in zip(events, mask.tolist()):
                log.append((ev.time, ev.object, self.heap.page_of(ev.object, ev.offset), hit))
        window = self.scenario.metrics_window_events
        self.total_events = self.total_misses = len(events)
        self.total_hits = int(mask.sum())
        for start in range(0, len(events), window):
            chunk = mask[start:start + window]
            self._win_events = self._win_misses = len(chunk)
            self._win_hits = int(chunk.sum())
            self._close_window(events[start + len(chunk) - 1].time)

    # ---------------------------------------------------------- boundaries

    def _recompute_delinquent(self) -> None:
        fresh = self.profiler.delinquent_set()
        if fresh != self.delinquent:
            LOG.debug(f"delinquent set changed: {sorted(self.delinquent)} -> {sorted(fresh)}")
        self.delinquent = fresh

    def _epoch(self, now: int) -> None:
        report = self.tier.migrate_epoch(now)
        self.result.migrations.append(report)
        self._win_moved_page += report.moved_bytes
        self._samples_since_epoch = 0
        self._recompute_delinquent()

    def _on_decay(self, now: int, ratio: float) -> None:
        self.tier.decay(ratio)
        if self.tracks_objects:
            self._refresh_scan(now)
        self._recompute_delinquent()

    def _refresh_scan(self, now: int) -> None:
        """Scan, cut off, select, relocate, then refresh counters."""
        sc = self.scenario
        self.scans += 1
        if sc.policy == "clove_no_cutoff":
            scan = scan_object_graph(self.heap, cutoff=CutoffDecision.everything(self.budget))
        else:
            scan = scan_object_graph(self.heap, budget=self.budget)
        self.last_cutoff = scan.cutoff
        for idx, size in enumerate(scan.histogram.bins):
            self.result.histograms.append(
                {"time_ns": now, "scan": self.scans, "bin": idx, "min_counter": 1 << idx, "bytes": size}
            )
        selection = select_regions(self.heap.regions.values(), sc.compaction.low_watermark, sc.compaction.high_watermark)
        if self.compaction_enabled:
            kind = None
            if self.scans % sc.compaction.normal_every == 0:
                kind = "piggyback"
            elif maybe_trigger_dedicated_phase(selection, sc.compaction.min_regions):
                kind = "dedicated"
            if kind is not None:
                gc_regions = sc.compaction.gc_regions_per_pass if kind == "piggyback" else 0
                report = compact(
                    self.heap, scan.cutoff, selection, kind,
                    gc_regions=gc_regions, now=now, reserve=sc.compaction.reserve_regions,
                )
                self.result.relocations.append(report)
                self._win_moved_object += report.total_bytes
                if sc.policy == "clove_one_shot" and report.total_bytes > 0:
                    self.compaction_enabled = False
                    LOG.info(f"one-shot compaction done at t={now}; relocation disabled from now on")
        self.tracker.refresh_counters(sc.tracker.refresh_ratio)
        self.heap.maybe_verify()
        LOG.info(
            f"refresh scan {self.scans} at t={now}: cutoff bin {scan.cutoff.cutoff_bin}, "
            f"{scan.histogram.total_bytes} B with non-zero counters, {len(selection)} regions in band"
        )

    def _close_window(self, now: int) -> None:
        tier_cfg = self.scenario.tier
        ratio = self._win_hits / self._win_misses if self._win_misses else 0.0
        increments = self.tracker.increments
        self.result.timeline.append(
            {
                "window": self._window_index,
                "time_ns": now,
                "events": self._win_events,
                "misses": self._win_misses,
                "fast_hit_ratio": ratio,
                "amat_ns": amat(ratio, tier_cfg.fast_latency_ns, tier_cfg.slow_latency_ns),
                "moved_bytes_object": self._win_moved_object,
                "moved_bytes_page": self._win_moved_page,
                "tracked_increments": increments - self._win_increments_base,
                "delinquent_set_size": len(self.delinquent),
                "hot_space_bytes": sum(r.live_bytes for r in self.heap.regions_by(Designation.HOT_SPACE)),
            }
        )
        self._window_index += 1
        self._win_events = self._win_misses = self._win_hits = 0
        self._win_moved_object = self._win_moved_page = 0
        self._win_increments_base = increments

    # -------------------------------------------------------------- summary

    def hot_space_fast_coverage(self) -> float:
        """Share of hot-space live bytes whose start page is currently fast-resident."""
        total = covered = 0
        for region in self.heap.regions_by(Designation.HOT_SPACE):
            for obj_id in region.objects:
                size = self.heap.objects[obj_id].size
                total += size
                if self.heap.page_of(obj_id) in self.tier.fast:
                    covered += size
        return covered / total if total else 0.0

    def _finish(self) -> None:
        sc = self.scenario
        res = self.result
        res.profiler_sites = self.profiler.site_rows()
        steady = steady_state([row["fast_hit_ratio"] for row in res.timeline])
        steady_amat = amat(steady, sc.tier.fast_latency_ns, sc.tier.slow_latency_ns)
        relocated = sum(r.total_bytes for r in res.relocations)
        hot_space = self.heap.regions_by(Designation.HOT_SPACE)
        res.summary = {
            "scenario": sc.name,
            "policy": sc.policy,
            "seed": sc.seed,
            "events": self.total_events,
            "misses": self.total_misses,
            "fast_hit_ratio": self.total_hits / self.total_misses if self.total_misses else 0.0,
            "steady_hit_ratio": steady,
            "steady_amat_ns": steady_amat,
            # modelled slowdown against an all-fast memory, not a measurement
            "amat_slowdown": steady_amat / sc.tier.fast_latency_ns,
            "total_relocated_bytes": relocated,
            "total_hot_moved_bytes": sum(r.moved_bytes for r in res.relocations),
            "total_migrated_bytes": sum(m.moved_bytes for m in res.migrations),
            "relocation_cost_ns": relocated / sc.compaction.relocation_bandwidth * 1e9,
            "migration_cost_ns": sum(m.cost_ns for m in res.migrations),
            "piggyback_phases": sum(1 for r in res.relocations if r.kind == "piggyback"),
            "dedicated_phases": sum(1 for r in res.relocations if r.kind == "dedicated"),
            "refresh_scans": self.scans,
            "migration_epochs": len(res.migrations),
            "samples": self.profiler.total_samples,
            "decay_ticks": self.profiler.decay_ticks,
            "tracked_increments": self.tracker.increments,
            "saturated_skips": self.tracker.saturated_skips,
            "delinquent_sites": len(self.delinquent),
            "hotness_shifts": len(self.workload.shifts_applied),
            "hot_space_regions": len(hot_space),
            "hot_space_bytes": sum(r.live_bytes for r in hot_space),
            "hot_space_density": hot_space_density(self.heap, self.last_cutoff) if self.last_cutoff else 0.0,
            "hot_space_fast_coverage": self.hot_space_fast_coverage(),
            "line_cache_hits": self.line_cache.hits if self.line_cache else 0,
            "footprint_bytes": self.kv.footprint,
            "fast_capacity_bytes": self.fast_capacity,
            "heap_capacity_bytes": self.heap.capacity,
        }


def run(
    scenario: ScenarioConfig,
    event_sink: Optional[EventSink] = None,
    event_log: bool = False,
) -> SimulationResult:
    return Simulation(scenario, event_sink=event_sink, event_log=event_log).run()


def run_summary(raw: Dict[str, object]) -> Dict[str, object]:
    """Validate a raw scenario mapping, run it, return only the summary (sweep worker)."""
    return run(build_scenario(raw)).summary
