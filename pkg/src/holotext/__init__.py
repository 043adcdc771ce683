"""Text line detection from region, character and linking-orientation maps."""

__version__ = "0.1.0"
