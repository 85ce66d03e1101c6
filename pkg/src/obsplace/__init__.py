"""Sensor placement and observer synthesis for box-bounded nonlinear systems."""

__version__ = "0.1.0"
