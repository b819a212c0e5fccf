"""Read-only figure scripts over the simulator's CSV outputs."""

__version__ = "0.1.0"
