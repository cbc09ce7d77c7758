"""Simulation and analysis toolkit for NV-diamond laser threshold magnetometry."""

__version__ = "0.1.0"
