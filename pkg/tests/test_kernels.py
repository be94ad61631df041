import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from nvsparse import _su2_py
from nvsparse.kernels import BACKEND, compiled_su2_product
from nvsparse.spin import SX, SY, SZ, to_matrix

try:
    from nvsparse import _su2
except ImportError:
    _su2 = None

needs_ext = pytest.mark.skipif(_su2 is None, reason="compiled extension not built")


def dense_product(ax, ay, az):
    u = np.eye(2, dtype=complex)
    for x, y, z in zip(ax, ay, az):
        u = expm(-1j * (x * SX + y * SY + z * SZ)) @ u
    return u


def test_backend_reported():
    assert BACKEND in ("cython", "python")


@given(st.integers(1, 40), st.integers(0, 2**32 - 1), st.floats(1e-6, 3.0))
def test_python_kernel_matches_dense_expm(n, seed, scale):
    r = np.random.default_rng(seed)
    ax, ay, az = (scale * r.normal(size=n) for _ in range(3))
    a, b = _su2_py.su2_product(ax, ay, az[None, :])
    assert np.allclose(to_matrix(a[0], b[0]), dense_product(ax, ay, az), atol=1e-12)


@needs_ext
@given(st.integers(1, 60), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_backends_agree(n, nb, seed):
    r = np.random.default_rng(seed)
    ax, ay = r.normal(size=n), r.normal(size=n)
    az = r.normal(size=(nb, n)) * r.choice([1e-4, 1.0], size=(nb, n))
    ac, bc = _su2.su2_product(ax, ay, az)
    ap, bp = _su2_py.su2_product(ax, ay, az)
    assert np.allclose(ac, ap, atol=1e-12) and np.allclose(bc, bp, atol=1e-12)


@needs_ext
def test_affine_backends_agree(rng):
    n = 300
    ax, ay, slope = rng.normal(size=n) * 0.1, rng.normal(size=n) * 0.1, rng.normal(size=n)
    base = rng.normal(size=(3, n)) * 0.05
    g = np.linspace(-0.2, 0.2, 7)
    ac, bc = _su2.su2_affine(ax, ay, base, slope, g)
    ap, bp = _su2_py.su2_affine(ax, ay, base, slope, g, chunk=5)
    assert np.allclose(ac, ap, atol=1e-12) and np.allclose(bc, bp, atol=1e-12)


@needs_ext
def test_small_angle_series_branch_matches_direct_trig():
    # angles straddling the series/trig switch at |theta| = 0.1
    th = np.array([0.0999999, 0.1000001, 1e-9, 0.05])
    for t in th:
        a, b = _su2.su2_product(np.array([t]), np.zeros(1), np.zeros((1, 1)))
        assert abs(a[0] - np.cos(t)) < 1e-16 + 1e-15
        assert abs(b[0] + 1j * np.sin(t)) < 1e-15


def test_empty_step_list_is_identity():
    a, b = _su2_py.su2_product(np.zeros(0), np.zeros(0), np.zeros((2, 0)))
    assert np.all(a == 1) and np.all(b == 0)
    if compiled_su2_product is not None:
        a, b = compiled_su2_product(np.zeros(0), np.zeros(0), np.zeros((2, 0)))
        assert np.all(a == 1) and np.all(b == 0)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        _su2_py.su2_product(np.zeros(3), np.zeros(2), np.zeros((1, 3)))
    if compiled_su2_product is not None:
        with pytest.raises(ValueError):
            compiled_su2_product(np.zeros(3), np.zeros(2), np.zeros((1, 3)))


def test_pure_python_env_switch():
    env = dict(os.environ, NVSPARSE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import nvsparse; print(nvsparse.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
