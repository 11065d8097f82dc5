"""tiersim - object-level tiered-memory simulator."""
