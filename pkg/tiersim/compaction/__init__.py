"""Hot-object compaction: hotness histogram, cutoff, region selection and relocation."""
from .hot_compaction import (
    CompactionConfig,
    CompactionError,
    CutoffDecision,
    HotnessHistogram,
    RegionSelection,
    RelocationReport,
    ScanResult,
    compact,
    compute_cutoff,
    hot_space_density,
    maybe_trigger_dedicated_phase,
    scan_object_graph,
    select_regions,
)

__all__ = [
    "CompactionConfig",
    "CompactionError",
    "CutoffDecision",
    "HotnessHistogram",
    "RegionSelection",
    "RelocationReport",
    "ScanResult",
    "compact",
    "compute_cutoff",
    "hot_space_density",
    "maybe_trigger_dedicated_phase",
    "scan_object_graph",
    "select_regions",
]
