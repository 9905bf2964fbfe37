# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch divergence kernels (hot loops of NMS, clustering, losses)."""

import numpy as np

from libc.math cimport log


cdef inline double _kl_dir(double mxp, double myp, double sxp, double syp, double rp,
                           double mxq, double myq, double sxq, double syq, double rq) noexcept nogil:
    cdef double a11 = sxp * sxp
    cdef double a22 = syp * syp
    cdef double a12 = rp * sxp * syp
    cdef double b12 = rq * sxq * syq
    cdef double det_p = a11 * a22 - a12 * a12
    cdef double det_q = (sxq * sxq) * (syq * syq) - b12 * b12
    cdef double i11 = (syq * syq) / det_q
    cdef double i22 = (sxq * sxq) / det_q
    cdef double i12 = -b12 / det_q
    cdef double trace = i11 * a11 + 2.0 * i12 * a12 + i22 * a22
    cdef double dx = mxq - mxp
    cdef double dy = myq - myp
    cdef double maha = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy
    cdef double out = 0.5 * (trace + maha - 2.0 + log(det_q / det_p))
    # Provably non-negative; clamp away rounding noise near zero.
    return out if out > 0.0 else 0.0


def kl_pairs(double[:, ::1] p, double[:, ::1] q):
    """Directed KL, elementwise over matching rows of (N, 5) arrays."""
    cdef Py_ssize_t n = p.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _kl_dir(p[i, 0], p[i, 1], p[i, 2], p[i, 3], p[i, 4],
                             q[i, 0], q[i, 1], q[i, 2], q[i, 3], q[i, 4])
    return out_arr


def sym_kl_pairs(double[:, ::1] p, double[:, ::1] q):
    """Symmetrized KL, elementwise over matching rows."""
    cdef Py_ssize_t n = p.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = 0.5 * (
                _kl_dir(p[i, 0], p[i, 1], p[i, 2], p[i, 3], p[i, 4],
                        q[i, 0], q[i, 1], q[i, 2], q[i, 3], q[i, 4])
                + _kl_dir(q[i, 0], q[i, 1], q[i, 2], q[i, 3], q[i, 4],
                          p[i, 0], p[i, 1], p[i, 2], p[i, 3], p[i, 4])
            )
    return out_arr


def sym_kl_cross(double[:, ::1] a, double[:, ::1] b):
    """(N, M) symmetrized KL between every row of ``a`` and every row of ``b``."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = 0.5 * (
                    _kl_dir(a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4],
                            b[j, 0], b[j, 1], b[j, 2], b[j, 3], b[j, 4])
                    + _kl_dir(b[j, 0], b[j, 1], b[j, 2], b[j, 3], b[j, 4],
                              a[i, 0], a[i, 1], a[i, 2], a[i, 3], a[i, 4])
                )
    return out_arr
