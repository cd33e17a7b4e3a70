"""SLIP-guided locomotion learning toolkit for a planar biped."""

__version__ = "0.1.0"
