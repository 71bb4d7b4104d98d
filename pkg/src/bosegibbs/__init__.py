"""High-temperature expansion of Bose-Hubbard Gibbs states on finite graphs."""

__version__ = "0.1.0"
