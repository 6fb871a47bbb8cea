"""Energy/area design-space exploration for power-limited chips."""
