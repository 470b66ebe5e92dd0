"""opsyslab: numerical laboratory for finite-dimensional operator systems."""

from .backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
