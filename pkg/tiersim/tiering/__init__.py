"""Page-granularity tiering backend."""
from .page_tier import LineCacheFilter, MigrationReport, TierConfig, TierState, fast_capacity_for

__all__ = ["LineCacheFilter", "MigrationReport", "TierConfig", "TierState", "fast_capacity_for"]
