"""Compressed sensing with combined l1 and total-variation penalties."""

__version__ = "0.1.0"
