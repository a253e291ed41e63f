# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo kernels. Same contracts as ``_kernels_py``."""
import numpy as np

from libc.math cimport INFINITY


def inverse_quadratic_prefix(const double[:, ::1] eta, const double[::1] w,
                             const double[::1] d, Py_ssize_t n_min):
    cdef Py_ssize_t S = eta.shape[0], L = eta.shape[1]
    cdef Py_ssize_t s, l
    cdef double acc, v
    out = np.empty((S, L - n_min + 1))
    cdef double[:, ::1] o = out
    with nogil:
        for s in range(S):
            acc = 0.0
            for l in range(L):
                v = w[l] * (eta[s, l] + d[l])
                acc = acc + v * v
                if l + 1 >= n_min:
                    o[s, l + 1 - n_min] = 1.0 / acc if acc != 0.0 else INFINITY
    return out


def l2_losses(const double[:, ::1] resid, const double[:, ::1] V,
              const double[:, ::1] ET, const double[::1] wq):
    cdef Py_ssize_t B = resid.shape[0], P = resid.shape[1], n = V.shape[1]
    cdef Py_ssize_t b, i, k
    cdef double c, r, s0, s1, s2
    out = np.empty((B, 3))
    cdef double[:, ::1] o = out
    with nogil:
        for b in range(B):
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            for i in range(P):
                c = 0.0
                for k in range(n):
                    c = c + V[b, k] * ET[i, k]
                r = resid[b, i]
                s0 = s0 + wq[i] * r * r
                s1 = s1 + wq[i] * (r + c) * (r + c)
                s2 = s2 + wq[i] * c * c
            o[b, 0] = s0
            o[b, 1] = s1
            o[b, 2] = s2
    return out
