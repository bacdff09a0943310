"""Multi-grained explicit-state model checking with a Zab reference model."""

__version__ = "0.1.0"
