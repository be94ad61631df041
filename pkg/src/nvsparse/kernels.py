"""Backend selection for the hot SU(2) propagation loop.

The compiled Cython kernel is used when it was built; otherwise the numpy
fallback is imported. Set ``NVSPARSE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _su2_py

BACKEND = "python"

if os.environ.get("NVSPARSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _su2 as _compiled
    except ImportError:  # extension not built
        _compiled = None
else:
    _compiled = None

if _compiled is not None:
    su2_product = _compiled.su2_product
    su2_affine = _compiled.su2_affine
    BACKEND = "cython"
else:
    su2_product = _su2_py.su2_product
    su2_affine = _su2_py.su2_affine

python_su2_product = _su2_py.su2_product
compiled_su2_product = None if _compiled is None else _compiled.su2_product

__all__ = ["BACKEND", "su2_product", "su2_affine", "python_su2_product", "compiled_su2_product"]
