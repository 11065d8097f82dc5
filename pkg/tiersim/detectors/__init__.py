"""Detectors package - per-object hotness tracking."""
from .hotness_tracker import (
    ActivationGate,
    ContentionOutcome,
    HotnessTracker,
    TrackerConfig,
    classify_cas_failure,
    simulate_header_contention,
)

__all__ = [
    "ActivationGate",
    "ContentionOutcome",
    "HotnessTracker",
    "TrackerConfig",
    "classify_cas_failure",
    "simulate_header_contention",
]
