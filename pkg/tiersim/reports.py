from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence

import pandas as pd

from .main import SimulationResult

LOG = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"

TIMELINE_COLUMNS = [
    "window",
    "time_ns",
    "events",
    "misses",
    "fast_hit_ratio",
    "amat_ns",
    "moved_bytes_object",
    "moved_bytes_page",
    "tracked_increments",
    "delinquent_set_size",
    "hot_space_bytes",
]
RELOCATION_COLUMNS = [
    "time_ns",
    "kind",
    "scanned_regions",
    "selected_regions",
    "moved_objects",
    "moved_bytes",
    "cold_moved_objects",
    "cold_moved_bytes",
    "demoted_objects",
    "demoted_bytes",
    "gc_hot_moved_objects",
    "gc_hot_moved_bytes",
    "freed_regions",
    "selected_hot_bytes",
    "min_source_ratio",
    "max_source_ratio",
    "truncated",
    "total_bytes",
]
MIGRATION_COLUMNS = ["time_ns", "promoted_pages", "demoted_pages", "fast_pages", "moved_bytes", "cost_ns"]
HISTOGRAM_COLUMNS = ["time_ns", "scan", "bin", "min_counter", "bytes"]
SITE_COLUMNS = ["site", "context", "count", "ratio", "delinquent"]
EVENT_COLUMNS = ["time_ns", "object", "page", "fast"]


def frame(rows: Iterable[Mapping[str, object]], columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=list(columns))


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def result_frames(result: SimulationResult) -> Dict[str, pd.DataFrame]:
    frames = {
        "timeline": frame(result.timeline, TIMELINE_COLUMNS),
        "relocations": frame((r.as_row() for r in result.relocations), RELOCATION_COLUMNS),
        "migrations": frame((m.as_row() for m in result.migrations), MIGRATION_COLUMNS),
        "histograms": frame(result.histograms, HISTOGRAM_COLUMNS),
        "profiler_sites": frame(result.profiler_sites, SITE_COLUMNS),
        "summary": pd.DataFrame([result.summary]),
    }
    if result.event_log is not None:
        frames["events"] = pd.DataFrame(result.event_log, columns=EVENT_COLUMNS)
    return frames


def write_results(result: SimulationResult, results_dir: Path) -> Dict[str, Path]:
    """Write every table of a run into `<results_dir>/<scenario name>/`."""
    out_dir = Path(results_dir) / result.scenario.name
    written = {name: write_csv(df, out_dir / f"{name}.csv") for name, df in result_frames(result).items()}
    LOG.info(f"{len(written)} CSV files written to {out_dir}")
    return written


def write_summaries(rows: List[Mapping[str, object]], path: Path) -> Path:
    return write_csv(pd.DataFrame(list(rows)), Path(path))


def moved_bytes_conserved(result: SimulationResult) -> bool:
    """Timeline moved-byte columns add up to the relocation and migration rows."""
    timeline = frame(result.timeline, TIMELINE_COLUMNS)
    relocated = sum(r.total_bytes for r in result.relocations)
    migrated = sum(m.moved_bytes for m in result.migrations)
    return (
        int(timeline["moved_bytes_object"].sum()) == relocated
        and int(timeline["moved_bytes_page"].sum()) == migrated
    )
