"""Accelerated mirror descent methods with numerical certification."""

__version__ = "0.1.0"
