# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SU(2) step-product kernel.

A unitary ``[[a, -conj(b)], [b, conj(a)]]`` is carried as the pair ``(a, b)``.
Each step is ``exp(-i (ax sx + ay sy + az sz))``; steps are applied in array
order, so step 0 acts first.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()


cdef inline void _cs(double th2, double* c, double* s) noexcept nogil:
    # cos(th) and sin(th)/th from th^2; the series is exact to rounding below 0.1 rad
    cdef double th
    if th2 < 0.01:
        c[0] = 1.0 + th2 * (-0.5 + th2 * (4.1666666666666664e-02 + th2 * (
            -1.3888888888888889e-03 + th2 * (2.4801587301587302e-05 + th2 * -2.7557319223985893e-07))))
        s[0] = 1.0 + th2 * (-1.6666666666666666e-01 + th2 * (8.3333333333333332e-03 + th2 * (
            -1.9841269841269841e-04 + th2 * (2.7557319223985893e-06 + th2 * -2.5052108385441720e-08))))
    else:
        th = sqrt(th2)
        c[0] = cos(th)
        s[0] = sin(th) / th


def su2_product(const double[::1] ax, const double[::1] ay, const double[:, ::1] az):
    cdef Py_ssize_t nb = az.shape[0]
    cdef Py_ssize_t n = az.shape[1]
    if ax.shape[0] != n or ay.shape[0] != n:
        raise ValueError("ax, ay and az must share the step axis")
    out_a = np.empty(nb, dtype=np.complex128)
    out_b = np.empty(nb, dtype=np.complex128)
    cdef double complex[::1] oa = out_a
    cdef double complex[::1] ob = out_b
    cdef Py_ssize_t i, k
    cdef double x, y, z, c, s
    cdef double ar, ai, br, bi, alr, ali, ber, bei, nar, nai, nbr, nbi
    with nogil:
        for i in range(nb):
            ar = 1.0
            ai = 0.0
            br = 0.0
            bi = 0.0
            for k in range(n):
                x = ax[k]
                y = ay[k]
                z = az[i, k]
                _cs(x * x + y * y + z * z, &c, &s)
                # alpha = c - i s z ; beta = s (y - i x)
                alr = c
                ali = -s * z
                ber = s * y
                bei = -s * x
                # a' = alpha a - conj(beta) b ; b' = beta a + conj(alpha) b
                nar = alr * ar - ali * ai - (ber * br + bei * bi)
                nai = alr * ai + ali * ar - (ber * bi - bei * br)
                nbr = ber * ar - bei * ai + (alr * br + ali * bi)
                nbi = ber * ai + bei * ar + (alr * bi - ali * br)
                ar = nar
                ai = nai
                br = nbr
                bi = nbi
            oa[i] = ar + 1j * ai
            ob[i] = br + 1j * bi
    return out_a, out_b


def su2_affine(const double[::1] ax, const double[::1] ay, const double[:, ::1] base,
               const double[::1] slope, const double[::1] g):
    """Products for ``az[r, k] = base[r, k] + g[j] * slope[k]``, shape ``(nr, ng)``."""
    cdef Py_ssize_t nr = base.shape[0]
    cdef Py_ssize_t n = base.shape[1]
    cdef Py_ssize_t ng = g.shape[0]
    if ax.shape[0] != n or ay.shape[0] != n or slope.shape[0] != n:
        raise ValueError("ax, ay, base and slope must share the step axis")
    out_a = np.empty((nr, ng), dtype=np.complex128)
    out_b = np.empty((nr, ng), dtype=np.complex128)
    cdef double complex[:, ::1] oa = out_a
    cdef double complex[:, ::1] ob = out_b
    cdef Py_ssize_t r, j, k
    cdef double gj, x, y, z, c, s
    cdef double ar, ai, br, bi, alr, ali, ber, bei, nar, nai, nbr, nbi
    with nogil:
        for r in range(nr):
            for j in range(ng):
                gj = g[j]
                ar = 1.0
                ai = 0.0
                br = 0.0
                bi = 0.0
                for k in range(n):
                    x = ax[k]
                    y = ay[k]
                    z = base[r, k] + gj * slope[k]
                    _cs(x * x + y * y + z * z, &c, &s)
                    alr = c
                    ali = -s * z
                    ber = s * y
                    bei = -s * x
                    nar = alr * ar - ali * ai - (ber * br + bei * bi)
                    nai = alr * ai + ali * ar - (ber * bi - bei * br)
                    nbr = ber * ar - bei * ai + (alr * br + ali * bi)
                    nbi = ber * ai + bei * ar + (alr * bi - ali * br)
                    ar = nar
                    ai = nai
                    br = nbr
                    bi = nbi
                oa[r, j] = ar + 1j * ai
                ob[r, j] = br + 1j * bi
    return out_a, out_b
