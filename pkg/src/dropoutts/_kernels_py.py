"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` must agree with them
(bit-exactly for the mask generator, to rounding for the float kernels).
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def splitmix64(z):
    z = np.asarray(z, dtype=np.uint64)
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(key, n):
    """``n`` doubles in [0, 1) from counter ``1..n`` under ``key``."""
    ctr = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = splitmix64(np.uint64(key) + ctr * GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def keep_mask(keys, n, p):
    keys = np.asarray(keys, dtype=np.uint64)
    p = np.asarray(p, dtype=np.float64)
    out = np.empty((keys.shape[0], n), dtype=np.uint8)
    for i in range(keys.shape[0]):
        out[i] = uniforms(keys[i], n) >= p[i]
    return out


def ols_detrend(x):
    x = np.asarray(x, dtype=np.float64)
    L = x.shape[1]
    t = np.arange(L, dtype=np.float64)
    tc = t - t.mean()
    xm = x.mean(axis=1)
    w = np.einsum("l,blc->bc", tc, x) / np.dot(tc, tc)
    b = xm - w * t.mean()
    trend = t[None, :, None] * w[:, None, :] + b[:, None, :]
    return x - trend, w, b


def sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(np.asarray(z) >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _minmax_norm(v, eps, joint):
    axis = (1, 2) if joint else 1
    lo = v.min(axis=axis, keepdims=True)
    hi = v.max(axis=axis, keepdims=True)
    return (v - lo) / (hi - lo + eps)


def spectral_flatness(A, eps, exclude_dc):
    Af = np.maximum(A, eps)
    if exclude_dc and Af.shape[1] > 1:
        Af = Af[:, 1:]
    ratio = np.exp(np.log(Af).mean(axis=1)) / Af.mean(axis=1)
    return np.where(np.ptp(Af, axis=1) == 0, 1.0, np.minimum(ratio, 1.0))


def spectral_gate(A, alpha, w_s, b_s, eps, lognorm=True, joint=False, use_sfm=True,
                  exclude_dc=False):
    """Normalised amplitudes, SFM, threshold and soft mask for ``A [B, K, C]``."""
    A = np.asarray(A, dtype=np.float64)
    Ahat = _minmax_norm(np.log1p(A) if lognorm else A, eps, joint)
    sfm = spectral_flatness(A, eps, exclude_dc)
    u = w_s * sfm + b_s if use_sfm else np.full_like(sfm, b_s)
    tau = sigmoid(u)
    sharp = np.logaddexp(0.0, alpha)
    M = sigmoid(sharp * (Ahat - tau[:, None, :]))
    return Ahat, sfm, tau, M


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """In-place Adam step on flat float64 arrays ``param``, ``m`` and ``v``.

    Rounds exactly like ``lr * (m / bc1) / (sqrt(v / bc2) + eps)`` after the
    moment updates ``m = beta1 * m + (1 - beta1) * g`` and
    ``v = beta2 * v + (1 - beta2) * (g * g)``.
    """
    grad = np.asarray(grad, dtype=np.float64).reshape(-1)
    tmp = np.multiply(grad, 1.0 - beta1)
    m *= beta1
    m += tmp
    np.multiply(grad, grad, out=tmp)
    tmp *= 1.0 - beta2
    v *= beta2
    v += tmp
    den = np.divide(v, bc2)
    np.sqrt(den, out=den)
    den += eps
    np.divide(m, bc1, out=tmp)
    tmp *= lr
    tmp /= den
    param -= tmp
