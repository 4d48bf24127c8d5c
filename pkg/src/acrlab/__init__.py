"""Dynamic ACR toolkit: parse, decompose, predict, simulate, verify."""

__version__ = "0.1.0"
