"""Refractive index of atomic lattices from the quantum-optics to the quantum-chemistry regime."""

__version__ = "0.1.0"
