"""Pure-numpy fallback for the SU(2) step-product kernel.

Same contract as the compiled ``_su2.su2_product``. The time-ordered product is
formed by pairwise (tree) reduction so every level is a vectorized numpy call.
"""
import numpy as np


def _steps(ax, ay, az):
    th = np.sqrt(ax * ax + ay * ay + az * az)
    c = np.cos(th)
    safe = np.where(th > 1e-300, th, 1.0)
    s = np.where(th > 1e-300, np.sin(th) / safe, 1.0)
    alpha = c - 1j * s * az
    beta = s * (ay - 1j * ax)
    return alpha, beta


def su2_product(ax, ay, az):
    ax = np.ascontiguousarray(ax, dtype=np.float64)
    ay = np.ascontiguousarray(ay, dtype=np.float64)
    az = np.ascontiguousarray(az, dtype=np.float64)
    if az.ndim != 2 or ax.shape[0] != az.shape[1] or ay.shape[0] != az.shape[1]:
        raise ValueError("ax, ay and az must share the step axis")
    nb, n = az.shape
    if n == 0:
        return np.ones(nb, dtype=np.complex128), np.zeros(nb, dtype=np.complex128)
    a, b = _steps(ax[None, :], ay[None, :], az)
    while a.shape[1] > 1:
        if a.shape[1] % 2:
            a = np.concatenate([a, np.ones((nb, 1), dtype=a.dtype)], axis=1)
            b = np.concatenate([b, np.zeros((nb, 1), dtype=b.dtype)], axis=1)
        a1, b1 = a[:, 0::2], b[:, 0::2]  # earlier
        a2, b2 = a[:, 1::2], b[:, 1::2]  # later
        a = a2 * a1 - np.conj(b2) * b1
        b = b2 * a1 + np.conj(a2) * b1
    return a[:, 0].copy(), b[:, 0].copy()


def su2_affine(ax, ay, base, slope, g, chunk=2_000_000):
    """Products for ``az[r, k] = base[r, k] + g[j] * slope[k]``, shape ``(nr, ng)``."""
    base = np.atleast_2d(np.asarray(base, dtype=np.float64))
    slope = np.asarray(slope, dtype=np.float64)
    g = np.atleast_1d(np.asarray(g, dtype=np.float64))
    nr, n = base.shape
    out_a = np.empty((nr, g.size), dtype=np.complex128)
    out_b = np.empty((nr, g.size), dtype=np.complex128)
    per = max(1, chunk // max(n, 1))
    for r in range(nr):
        for j0 in range(0, g.size, per):
            gj = g[j0:j0 + per]
            az = base[r][None, :] + gj[:, None] * slope[None, :]
            a, b = su2_product(ax, ay, az)
            out_a[r, j0:j0 + per] = a
            out_b[r, j0:j0 + per] = b
    return out_a, out_b
