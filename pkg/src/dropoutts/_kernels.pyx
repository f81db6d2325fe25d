# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p, sqrt
from libc.stdint cimport uint64_t, uint8_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _splitmix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _sigmoid(double z) nogil:
    cdef double e = exp(-fabs(z))
    if z >= 0:
        return 1.0 / (1.0 + e)
    return e / (1.0 + e)


cdef inline double _softplus(double a) nogil:
    if a > 0:
        return a + log1p(exp(-a))
    return log1p(exp(a))


def splitmix64(z):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] a = np.ascontiguousarray(np.atleast_1d(z), dtype=np.uint64).copy()
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        a[i] = _splitmix64(a[i])
    return a


def uniforms(key, Py_ssize_t n):
    cdef uint64_t k = <uint64_t>int(key)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t j
    with nogil:
        for j in range(n):
            out[j] = <double>(_splitmix64(k + <uint64_t>(j + 1) * GOLDEN) >> 11) * INV53
    return out


def keep_mask(keys, Py_ssize_t n, p):
    cdef const uint64_t[:] kv = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef const double[:] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t B = kv.shape[0], i, j
    out = np.empty((B, n), dtype=np.uint8)
    cdef uint8_t[:, :] ov = out
    cdef uint64_t k
    cdef double pi
    with nogil:
        for i in range(B):
            k = kv[i]
            pi = pv[i]
            for j in range(n):
                ov[i, j] = (<double>(_splitmix64(k + <uint64_t>(j + 1) * GOLDEN) >> 11) * INV53) >= pi
    return out


def ols_detrend(x):
    cdef const double[:, :, :] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t B = xv.shape[0], L = xv.shape[1], C = xv.shape[2]
    xd = np.empty((B, L, C))
    w = np.empty((B, C))
    b = np.empty((B, C))
    cdef double[:, :, :] dv = xd
    cdef double[:, :] wv = w, bv = b
    cdef double tm = (L - 1) / 2.0, stt = 0.0, sx, stx, ww, bb
    cdef Py_ssize_t i, t, c
    for t in range(L):
        stt += (t - tm) * (t - tm)
    with nogil:
        for i in range(B):
            for c in range(C):
                sx = 0.0
                stx = 0.0
                for t in range(L):
                    sx += xv[i, t, c]
                    stx += (t - tm) * xv[i, t, c]
                ww = stx / stt
                bb = sx / L - ww * tm
                wv[i, c] = ww
                bv[i, c] = bb
                for t in range(L):
                    dv[i, t, c] = xv[i, t, c] - (t * ww + bb)
    return xd, w, b


def spectral_gate(A, double alpha, double w_s, double b_s, double eps, bint lognorm=True,
                  bint joint=False, bint use_sfm=True, bint exclude_dc=False):
    cdef const double[:, :, :] av = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t B = av.shape[0], K = av.shape[1], C = av.shape[2]
    Ahat = np.empty((B, K, C))
    M = np.empty((B, K, C))
    sfm = np.empty((B, C))
    tau = np.empty((B, C))
    cdef double[:, :, :] hv = Ahat, mv = M
    cdef double[:, :] sv = sfm, tv = tau
    cdef double sharp = _softplus(alpha), lo, hi, v, a, slog, ssum, u, den
    cdef Py_ssize_t i, k, c, k0 = 1 if (exclude_dc and K > 1) else 0
    with nogil:
        for i in range(B):
            for c in range(C):
                for k in range(K):
                    v = log1p(av[i, k, c]) if lognorm else av[i, k, c]
                    hv[i, k, c] = v
            if joint:
                lo = hv[i, 0, 0]
                hi = lo
                for k in range(K):
                    for c in range(C):
                        v = hv[i, k, c]
                        if v < lo:
                            lo = v
                        if v > hi:
                            hi = v
                den = hi - lo + eps
                for k in range(K):
                    for c in range(C):
                        hv[i, k, c] = (hv[i, k, c] - lo) / den
            else:
                for c in range(C):
                    lo = hv[i, 0, c]
                    hi = lo
                    for k in range(K):
                        v = hv[i, k, c]
                        if v < lo:
                            lo = v
                        if v > hi:
                            hi = v
                    den = hi - lo + eps
                    for k in range(K):
                        hv[i, k, c] = (hv[i, k, c] - lo) / den
            for c in range(C):
                slog = 0.0
                ssum = 0.0
                lo = av[i, k0, c] if av[i, k0, c] > eps else eps
                hi = lo
                for k in range(k0, K):
                    a = av[i, k, c]
                    if a < eps:
                        a = eps
                    if a < lo:
                        lo = a
                    if a > hi:
                        hi = a
                    slog += log(a)
                    ssum += a
                if lo == hi:
                    sv[i, c] = 1.0
                else:
                    sv[i, c] = min(exp(slog / (K - k0)) / (ssum / (K - k0)), 1.0)
                u = w_s * sv[i, c] + b_s if use_sfm else b_s
                tv[i, c] = _sigmoid(u)
                for k in range(K):
                    mv[i, k, c] = _sigmoid(sharp * (hv[i, k, c] - tv[i, c]))
    return Ahat, sfm, tau, M


def adam_update(double[::1] param, grad, double[::1] m, double[::1] v, double lr, double beta1,
                double beta2, double eps, double bc1, double bc2):
    # single fused pass; built with -ffp-contract=off so it rounds like the numpy version
    cdef const double[::1] g = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t i, n = param.shape[0]
    cdef double c1 = 1.0 - beta1, c2 = 1.0 - beta2, gi
    if g.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_update: length mismatch")
    with nogil:
        for i in range(n):
            gi = g[i]
            m[i] = beta1 * m[i] + gi * c1
            v[i] = beta2 * v[i] + (gi * gi) * c2
            param[i] -= lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)
