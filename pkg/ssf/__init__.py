"""Single-slot-finality ebb-and-flow protocol: engine, simulator and checks."""

__version__ = "0.3.0"
