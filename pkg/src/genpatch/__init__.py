"""Mine fix patterns from patch histories, infer generic patches, and apply them."""

__version__ = "0.1.0"
