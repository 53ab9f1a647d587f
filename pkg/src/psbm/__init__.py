"""Pulse-shape binary multiplexing: RRC pulse analysis, link model, receivers and BER simulation."""

__version__ = "0.1.0"
