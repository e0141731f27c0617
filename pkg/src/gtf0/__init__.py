"""F0-based Gammatone harmonic emphasis for speech in noise."""

__version__ = "0.1.0"
