"""Runtime attack-pattern detection over EVM execution traces."""

__version__ = "0.1.0"
