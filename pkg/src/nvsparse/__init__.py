"""NV-ensemble ac magnetometry with robust pulses and sparse-sample field reconstruction."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
