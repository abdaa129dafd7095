"""Uplink cell-free XL-MIMO simulator with learned resource allocation."""

__version__ = "0.1.0"
