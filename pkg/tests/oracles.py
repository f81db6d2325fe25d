"""Independent reference implementations used by the tests.

Nothing here imports from the package: each oracle is written from the
defining formula so agreement is meaningful.
"""

import math

import numpy as np


def naive_rdft(x):
    """Direct O(L^2) one-sided DFT, Z_k = sum_t x_t exp(-2 pi i k t / L)."""
    x = np.asarray(x, dtype=np.float64)
    L = x.size
    t = np.arange(L)
    out = np.empty(L // 2 + 1, dtype=complex)
    for k in range(L // 2 + 1):
        ang = -2.0 * math.pi * k * t / L
        out[k] = complex(np.sum(x * np.cos(ang)), np.sum(x * np.sin(ang)))
    return out


def ols_normal_equations(y):
    """Slope/intercept of y on t = 0..L-1 via the 2x2 normal equations."""
    y = np.asarray(y, dtype=np.float64)
    L = y.size
    t = np.arange(L, dtype=np.float64)
    S_t, S_tt = t.sum(), (t * t).sum()
    S_y, S_ty = y.sum(), (t * y).sum()
    det = L * S_tt - S_t * S_t
    w = (L * S_ty - S_t * S_y) / det
    b = (S_tt * S_y - S_t * S_ty) / det
    return w, b


def sigmoid_scalar(z):
    return 1.0 / (1.0 + math.exp(-z))


def softplus_scalar(a):
    return math.log1p(math.exp(a)) if a < 30 else a + math.log1p(math.exp(-a))


def central_diff(f, x0, h=1e-5):
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def spearman(a, b):
    ra = np.argsort(np.argsort(a)).astype(float)
    rb = np.argsort(np.argsort(b)).astype(float)
    ra -= ra.mean()
    rb -= rb.mean()
    return float(ra @ rb / math.sqrt((ra @ ra) * (rb @ rb)))
