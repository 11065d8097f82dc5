"""Analyzers: online miss profiler and offline placement oracle."""
from .oracle import (
    UNITS,
    ObjectLayout,
    intrapage_skew,
    oracle_hit_mask,
    oracle_placement,
    oracle_table,
    sample_observability,
    trace_arrays,
)
from .profiler import Profiler, ProfilerConfig, SiteStats, coverage, profile_stream

__all__ = [
    "UNITS",
    "ObjectLayout",
    "intrapage_skew",
    "oracle_hit_mask",
    "oracle_placement",
    "oracle_table",
    "sample_observability",
    "trace_arrays",
    "Profiler",
    "ProfilerConfig",
    "SiteStats",
    "coverage",
    "profile_stream",
]
