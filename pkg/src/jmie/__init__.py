"""Joint clinical concept, assertion, and relation extraction engine."""

__version__ = "0.1.0"
