# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mixture kernels: the hot inner loop of samplers and probes.

Mirrors ``_kernels_py`` exactly (same functions, same semantics).  Single
points dominate the workload: each sampler step and each curvature probe
evaluates the mixture at one x, so per-call overhead matters more than
vectorized throughput.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453


cdef double _lse_exponents(const double[:, ::1] means, const double[::1] log_weights,
                           double var, const double[::1] x, double* exponents) nogil:
    """Fill exponents[i] = log_w[i] - ||x - mu_i||^2 / (2 var); return their LSE."""
    cdef Py_ssize_t K = means.shape[0]
    cdef Py_ssize_t d = means.shape[1]
    cdef Py_ssize_t i, j
    cdef double sq, dj, m, acc
    m = -1e308
    for i in range(K):
        sq = 0.0
        for j in range(d):
            dj = means[i, j] - x[j]
            sq += dj * dj
        exponents[i] = log_weights[i] - 0.5 * sq / var
        if exponents[i] > m:
            m = exponents[i]
    acc = 0.0
    for i in range(K):
        acc += exp(exponents[i] - m)
    return m + log(acc)


def mixture_eval(const double[:, ::1] means, const double[::1] log_weights,
                 double var, const double[::1] x):
    """Evaluate a single point: ``(logpdf, score, resp)``."""
    cdef Py_ssize_t K = means.shape[0]
    cdef Py_ssize_t d = means.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] score = np.zeros(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] resp = np.empty(K)
    cdef double[::1] score_v = score
    cdef double[::1] resp_v = resp
    cdef double[::1] exponents = np.empty(K)
    cdef Py_ssize_t i, j
    cdef double lse, r

    lse = _lse_exponents(means, log_weights, var, x, &exponents[0])
    for i in range(K):
        r = exp(exponents[i] - lse)
        resp_v[i] = r
        for j in range(d):
            score_v[j] += r * (means[i, j] - x[j])
    for j in range(d):
        score_v[j] /= var
    return lse - 0.5 * d * (LOG_2PI + log(var)), score, resp


def mixture_logpdf_batch(const double[:, ::1] means, const double[::1] log_weights,
                         double var, const double[:, ::1] xs):
    """Log-density of the mixture at each row of ``xs``."""
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t K = means.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] out_v = out
    cdef double[::1] exponents = np.empty(K)
    cdef Py_ssize_t r
    cdef double norm = -0.5 * means.shape[1] * (LOG_2PI + log(var))
    for r in range(n):
        out_v[r] = _lse_exponents(means, log_weights, var, xs[r], &exponents[0]) + norm
    return out


def mixture_score_vjp(const double[:, ::1] means, const double[::1] log_weights,
                      double var, const double[::1] x, const double[::1] w):
    """Product of the (symmetric) score Jacobian with ``w``."""
    cdef Py_ssize_t K = means.shape[0]
    cdef Py_ssize_t d = means.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(d)
    cdef double[::1] out_v = out
    cdef double[::1] exponents = np.empty(K)
    cdef double[::1] score = np.zeros(d)
    cdef Py_ssize_t i, j
    cdef double lse, r, mw, sw, mij

    lse = _lse_exponents(means, log_weights, var, x, &exponents[0])
    for i in range(K):
        r = exp(exponents[i] - lse)
        for j in range(d):
            score[j] += r * (means[i, j] - x[j]) / var
    for i in range(K):
        r = exp(exponents[i] - lse)
        mw = 0.0
        for j in range(d):
            mw += (means[i, j] - x[j]) / var * w[j]
        for j in range(d):
            out_v[j] += r * mw * (means[i, j] - x[j]) / var
    sw = 0.0
    for j in range(d):
        sw += score[j] * w[j]
    for j in range(d):
        out_v[j] -= score[j] * sw + w[j] / var
    return out
