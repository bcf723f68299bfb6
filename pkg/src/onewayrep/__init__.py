"""Unitary one-way quantum repeaters for lossy bosonic channels."""

__version__ = "0.1.0"
