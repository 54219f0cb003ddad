"""Perfect simulation of two-point unilateral fields on the square lattice."""
__version__ = "0.1.0"
