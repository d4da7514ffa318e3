"""Magnetic Thomas-Fermi theory of atoms in strong magnetic fields."""

__version__ = "0.1.0"
