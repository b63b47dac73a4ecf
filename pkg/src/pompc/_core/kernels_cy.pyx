# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels.

Same API and arithmetic as ``kernels_np``: GEMM through BLAS with bias
add and activation fused in C loops, so a whole MLP chain runs without
per-layer Python dispatch or broadcast temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as cexp
from libc.math cimport fabs
from libc.math cimport tanh as ctanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "cython"

cdef enum:
    _ACT_IDENTITY = 0
    _ACT_MISH = 1
    _ACT_TANH = 2

ACT_IDENTITY = _ACT_IDENTITY
ACT_MISH = _ACT_MISH
ACT_TANH = _ACT_TANH


cdef inline double _mish(double u) noexcept nogil:
    # u * tanh(softplus(u)) via the rational form in w = exp(-|u|);
    # same arithmetic as kernels_np.tanh_softplus_from_w
    cdef double w = cexp(-fabs(u))
    if u >= 0.0:
        return u * ((1.0 + 2.0 * w) / (1.0 + 2.0 * w + 2.0 * w * w))
    return u * ((2.0 * w + w * w) / (2.0 + 2.0 * w + w * w))


cdef void _layer(double[:, ::1] x, double[:, ::1] w, double[::1] b,
                 double[:, ::1] out, int act) noexcept nogil:
    # out[n, m] = act(x[n, k] @ w[m, k].T + b). C-order (n, k) is Fortran
    # (k, n), so in Fortran terms out_F(m, n) = w_F(k, m)^T * x_F(k, n).
    cdef int m = <int> w.shape[0]
    cdef int n = <int> x.shape[0]
    cdef int k = <int> x.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ta = b'T', tb = b'N'
    cdef Py_ssize_t i, j
    cdef double u
    if n == 0:
        return
    dgemm(&ta, &tb, &m, &n, &k, &one, &w[0, 0], &k, &x[0, 0], &k,
          &zero, &out[0, 0], &m)
    for i in range(n):
        for j in range(m):
            out[i, j] += b[j]
    if act == _ACT_MISH:
        for i in range(n):
            for j in range(m):
                out[i, j] = _mish(out[i, j])
    elif act == _ACT_TANH:
        for i in range(n):
            for j in range(m):
                out[i, j] = ctanh(out[i, j])


def mlp_forward(x, weights, biases, act_ids):
    """Eval-mode MLP chain; see kernels_np.mlp_forward."""
    h = np.ascontiguousarray(x, dtype=np.float64)
    for w, b, act in zip(weights, biases, act_ids):
        out = np.empty((h.shape[0], w.shape[0]), dtype=np.float64)
        _layer(h, np.ascontiguousarray(w, dtype=np.float64),
               np.ascontiguousarray(b, dtype=np.float64), out, act)
        h = out
    return h


cdef void _simnorm_rows(double[:, ::1] x, double[:, ::1] out,
                        int group) noexcept nogil:
    cdef Py_ssize_t i, g, j, base
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ngroups = x.shape[1] // group
    cdef double m, s
    for i in range(n):
        for g in range(ngroups):
            base = g * group
            m = x[i, base]
            for j in range(1, group):
                if x[i, base + j] > m:
                    m = x[i, base + j]
            s = 0.0
            for j in range(group):
                out[i, base + j] = cexp(x[i, base + j] - m)
                s += out[i, base + j]
            for j in range(group):
                out[i, base + j] /= s


def simnorm(x, int group):
    """Grouped softmax; see kernels_np.simnorm."""
    h = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(h)
    _simnorm_rows(h, out, group)
    return out
