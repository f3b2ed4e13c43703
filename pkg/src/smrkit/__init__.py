"""One-dimensional design and characterisation of solidly mounted BAW resonators."""

__version__ = "0.1.0"
