# cython: language_level=3
"""Compiled contraction kernels.

Reference semantics live in numpy_backend.py; this module mirrors those
signatures with explicit loops over the node axis. Inner sums run in fixed
ascending index order, so each call is deterministic.
"""

import numpy as np

NAME = "ext"


def christoffel(double[:, :, ::1] ginv, double[:, :, :, ::1] S):
    cdef Py_ssize_t M = ginv.shape[0]
    cdef int n = <int> ginv.shape[1]
    out = np.empty((M, n, n, n), dtype=np.float64)
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t m
    cdef int k, i, j, l
    cdef double acc
    with nogil:
        for m in range(M):
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        acc = 0.0
                        for l in range(n):
                            acc += ginv[m, k, l] * S[m, i, j, l]
                        o[m, k, i, j] = 0.5 * acc
    return out


def ricci_quadratic(double[:, :, :, ::1] gam):
    cdef Py_ssize_t M = gam.shape[0]
    cdef int n = <int> gam.shape[1]
    out = np.empty((M, n, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef double[4] tr
    cdef Py_ssize_t m
    cdef int i, j, k, l
    cdef double acc
    with nogil:
        for m in range(M):
            for l in range(n):
                acc = 0.0
                for k in range(n):
                    acc += gam[m, k, k, l]
                tr[l] = acc
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += tr[l] * gam[m, l, i, j]
                    for k in range(n):
                        for l in range(n):
                            acc -= gam[m, k, i, l] * gam[m, l, k, j]
                    o[m, i, j] = acc
    return out


def riemann_sq(double[:, :, :, ::1] gam, double[:, :, :, :, ::1] dgam):
    cdef Py_ssize_t M = gam.shape[0]
    cdef int n = <int> gam.shape[1]
    out = np.empty(M, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t m
    cdef int l, i, j, k, p
    cdef double r, total
    with nogil:
        for m in range(M):
            total = 0.0
            for l in range(n):
                for i in range(n):
                    for j in range(n):
                        for k in range(n):
                            r = dgam[m, i, l, j, k] - dgam[m, j, l, i, k]
                            for p in range(n):
                                r += gam[m, l, i, p] * gam[m, p, j, k]
                                r -= gam[m, l, j, p] * gam[m, p, i, k]
                            total += r * r
            o[m] = total
    return out


def vf_terms(double[:, :, ::1] ginv, double[:, :, :, ::1] dginv,
             double[:, :, :, ::1] gam):
    cdef Py_ssize_t M = ginv.shape[0]
    cdef int n = <int> ginv.shape[1]
    v_out = np.empty((M, n), dtype=np.float64)
    f_out = np.empty(M, dtype=np.float64)
    cdef double[:, ::1] v = v_out
    cdef double[::1] f = f_out
    cdef double[4] tr
    cdef Py_ssize_t m
    cdef int i, j, k, l
    cdef double acc, fa
    with nogil:
        for m in range(M):
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += gam[m, j, j, i]
                tr[i] = acc
            for k in range(n):
                acc = 0.0
                for i in range(n):
                    for j in range(n):
                        acc += ginv[m, i, j] * gam[m, k, i, j]
                    acc -= ginv[m, i, k] * tr[i]
                v[m, k] = acc
            fa = 0.0
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        fa -= dginv[m, k, i, j] * gam[m, k, i, j]
                    fa += dginv[m, k, i, k] * tr[i]
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += tr[l] * gam[m, l, i, j]
                        for k in range(n):
                            acc -= gam[m, k, j, l] * gam[m, l, i, k]
                    fa += ginv[m, i, j] * acc
            f[m] = fa
    return v_out, f_out


def sym_grad_v(double[:, :, :, ::1] gam, double[:, ::1] v, double[:, :, ::1] dv):
    cdef Py_ssize_t M = gam.shape[0]
    cdef int n = <int> gam.shape[1]
    out = np.empty((M, n, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t m
    cdef int i, j, k
    cdef double acc
    with nogil:
        for m in range(M):
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += gam[m, k, i, j] * v[m, k]
                    o[m, i, j] = dv[m, i, j] + dv[m, j, i] - 2.0 * acc
    return out


def metric_dot_sym(double[:, :, ::1] ginv, double[:, :, ::1] a,
                   double[:, :, ::1] b):
    cdef Py_ssize_t M = ginv.shape[0]
    cdef int n = <int> ginv.shape[1]
    out = np.empty(M, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t m
    cdef int i, j, p, q
    cdef double acc
    with nogil:
        for m in range(M):
            acc = 0.0
            for i in range(n):
                for p in range(n):
                    for j in range(n):
                        for q in range(n):
                            acc += ginv[m, i, p] * ginv[m, j, q] * a[m, i, j] * b[m, p, q]
            o[m] = acc
    return out
