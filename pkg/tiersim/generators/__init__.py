"""Workload generators: synthetic key-value streams and trace replay."""
from .kv_workload import (
    AccessEvent,
    HotWarmDistribution,
    KvHeap,
    KvWorkload,
    KvWorkloadSpec,
    ShiftPoint,
    UniformDistribution,
    ZipfianDistribution,
    build_kv_heap,
)
from .trace_replay import TraceFormatError, TraceWriter, replay_trace, write_trace

__all__ = [
    "AccessEvent",
    "HotWarmDistribution",
    "KvHeap",
    "KvWorkload",
    "KvWorkloadSpec",
    "ShiftPoint",
    "UniformDistribution",
    "ZipfianDistribution",
    "build_kv_heap",
    "TraceFormatError",
    "TraceWriter",
    "replay_trace",
    "write_trace",
]
