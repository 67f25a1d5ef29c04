"""Joint learning of a graph and its spectral filter from signal observations."""

__version__ = "0.1.0"
