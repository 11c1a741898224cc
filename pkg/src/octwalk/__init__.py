"""Classification of lattice walk models in the positive octant."""

__version__ = "0.1.0"
