# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the reference kernels; identical semantics, tight loops."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def span_pool_forward(double[:, ::1] h):
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t d = h.shape[1]
    out_arr = np.empty((n, n, d), dtype=np.float64)
    arg_arr = np.empty((n, n, d), dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, ::1] arg = arg_arr
    cdef Py_ssize_t i, j, c, best_ix
    cdef double best
    for i in range(n):
        for c in range(d):
            out[i, i, c] = h[i, c]
            arg[i, i, c] = i
        for j in range(i + 1, n):
            for c in range(d):
                best = out[i, j - 1, c]
                best_ix = arg[i, j - 1, c]
                # strict improvement keeps the lowest attaining index
                if h[j, c] > best:
                    best = h[j, c]
                    best_ix = j
                out[i, j, c] = best
                arg[i, j, c] = best_ix
                out[j, i, c] = best
                arg[j, i, c] = best_ix
    return out_arr, arg_arr


def span_pool_backward(cnp.int64_t[:, :, ::1] arg, double[:, :, ::1] grad_out, Py_ssize_t n_words):
    cdef Py_ssize_t n = grad_out.shape[0]
    cdef Py_ssize_t d = grad_out.shape[2]
    grad_h_arr = np.zeros((n_words, d), dtype=np.float64)
    cdef double[:, ::1] grad_h = grad_h_arr
    cdef Py_ssize_t i, j, c
    for i in range(n):
        for j in range(n):
            for c in range(d):
                grad_h[arg[i, j, c], c] += grad_out[i, j, c]
    return grad_h_arr


def neighbor_agg_forward(double[:, :, ::1] g, double[::1] wh, double[::1] wv):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t d = g.shape[2]
    out_arr = np.empty((n, n, d), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef double acc
    for i in range(n):
        for j in range(n):
            for c in range(d):
                acc = g[i, j, c]
                if j > 0:
                    acc += wh[j - 1] * g[i, j - 1, c]
                if j < n - 1:
                    acc += wh[j + 1] * g[i, j + 1, c]
                if i > 0:
                    acc += wv[i - 1] * g[i - 1, j, c]
                if i < n - 1:
                    acc += wv[i + 1] * g[i + 1, j, c]
                out[i, j, c] = acc
    return out_arr


def neighbor_agg_backward(double[:, :, ::1] g, double[::1] wh, double[::1] wv,
                          double[:, :, ::1] grad_out):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t d = g.shape[2]
    grad_g_arr = np.empty((n, n, d), dtype=np.float64)
    grad_wh_arr = np.zeros(n, dtype=np.float64)
    grad_wv_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, :, ::1] grad_g = grad_g_arr
    cdef double[::1] grad_wh = grad_wh_arr
    cdef double[::1] grad_wv = grad_wv_arr
    cdef Py_ssize_t i, j, c
    cdef double acc, acc_w
    for i in range(n):
        for j in range(n):
            acc_w = 0.0
            for c in range(d):
                acc = grad_out[i, j, c]
                if j < n - 1:
                    acc += wh[j] * grad_out[i, j + 1, c]
                    acc_w += g[i, j, c] * grad_out[i, j + 1, c]
                if j > 0:
                    acc += wh[j] * grad_out[i, j - 1, c]
                    acc_w += g[i, j, c] * grad_out[i, j - 1, c]
                if i < n - 1:
                    acc += wv[i] * grad_out[i + 1, j, c]
                if i > 0:
                    acc += wv[i] * grad_out[i - 1, j, c]
                grad_g[i, j, c] = acc
            grad_wh[j] += acc_w
    for i in range(n):
        acc_w = 0.0
        for j in range(n):
            for c in range(d):
                if i < n - 1:
                    acc_w += g[i, j, c] * grad_out[i + 1, j, c]
                if i > 0:
                    acc_w += g[i, j, c] * grad_out[i - 1, j, c]
        grad_wv[i] = acc_w
    return grad_g_arr, grad_wh_arr, grad_wv_arr
