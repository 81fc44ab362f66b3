"""Decoherent discrete-time quantum walks on a line with a one-parameter coin."""

__version__ = "0.1.0"
