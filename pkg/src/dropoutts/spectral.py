"""Spectral noise scorer.

Pipeline per window ``x [L, C]``::

    detrend -> rfft -> |Z| -> log-normalise -> SFM threshold -> soft mask
            -> irfft(Z * M) -> restore trend -> mean |x - x'|

The batch functions (``score_batch`` / ``score_batch_backward``) are what the
training loop uses; the single-window functions wrap them with ``B = 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from ._kernels_py import sigmoid
from .errors import DegenerateFitError, InsufficientDataError

DETREND_MODES = ("global_ols", "end_to_end", "none")


@dataclass(frozen=True)
class ScorerParams:
    alpha: float = 10.0
    w_s: float = 1.0
    b_s: float = 0.0
    gamma: float = 1.0
    p_min: float = 0.05
    p_max: float = 0.5
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.p_min < self.p_max < 1.0):
            raise ValueError(f"need 0 <= p_min < p_max < 1, got ({self.p_min}, {self.p_max})")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def learnable(self) -> np.ndarray:
        return np.array([self.alpha, self.w_s, self.b_s, self.gamma])

    def with_learnable(self, v) -> "ScorerParams":
        a, w, b, g = (float(u) for u in v)
        return replace(self, alpha=a, w_s=w, b_s=b, gamma=g)

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in
                ("alpha", "w_s", "b_s", "gamma", "p_min", "p_max", "eps")}


@dataclass(frozen=True)
class ScorerOptions:
    """Structural switches used by the ablations.

    ``use_sfm=False`` drops the SFM term so the threshold is ``sigmoid(b_s)``
    (0.5 at the default ``b_s``), i.e. a purely learnable threshold.
    ``lognorm=False`` min-max normalises raw amplitudes instead of ``log1p``.
    """

    detrend: str = "global_ols"
    lognorm: bool = True
    use_sfm: bool = True
    exclude_dc: bool = False
    joint_norm: bool = False

    def __post_init__(self):
        if self.detrend not in DETREND_MODES:
            raise ValueError(f"detrend must be one of {DETREND_MODES}, got {self.detrend!r}")


DEFAULT_OPTIONS = ScorerOptions()


@dataclass(frozen=True)
class SpectralDecomposition:
    trend_w: np.ndarray
    trend_b: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    A_hat: np.ndarray
    sfm: np.ndarray
    tau: np.ndarray
    M: np.ndarray

    def to_csv(self, path: str | Path | None = None) -> str:
        """Dump ``(channel, bin, amplitude, A_hat, mask)`` rows for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["channel", "bin", "amplitude", "a_hat", "mask", "tau", "sfm"])
        K, C = self.A.shape
        for c in range(C):
            for k in range(K):
                w.writerow([c, k, repr(float(self.A[k, c])), repr(float(self.A_hat[k, c])),
                            repr(float(self.M[k, c])), repr(float(self.tau[c])),
                            repr(float(self.sfm[c]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_bytes(text.encode("utf-8"))
        return text


@dataclass(frozen=True)
class NoiseScoreResult:
    score: float
    reconstruction: np.ndarray
    decomposition: SpectralDecomposition


# -- elementary operations ---------------------------------------------------

def detrend_ols(x: np.ndarray):
    """Remove the per-channel least-squares line ``w * t + b`` (``t = 0..L-1``).

    Returns ``(detrended, w, b)``; 1-D input is treated as one channel.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] < 2:
        raise DegenerateFitError(f"need at least 2 samples to fit a line, got {x.shape[0]}")
    xd, w, b = kernels.ols_detrend(x[None])
    if squeeze:
        return xd[0, :, 0], w[0, 0], b[0, 0]
    return xd[0], w[0], b[0]


def detrend_end_to_end(x: np.ndarray):
    """Line through the first and last sample of each channel."""
    x = np.asarray(x, dtype=np.float64)
    L = x.shape[-2]
    if L < 2:
        raise DegenerateFitError(f"need at least 2 samples to fit a line, got {L}")
    w = (x[..., -1, :] - x[..., 0, :]) / (L - 1)
    b = x[..., 0, :].copy()
    t = np.arange(L, dtype=np.float64)[:, None]
    return x - (t * w[..., None, :] + b[..., None, :]), w, b


def _detrend_batch(X: np.ndarray, mode: str):
    B, L, C = X.shape
    if L < 2:
        raise DegenerateFitError(f"need at least 2 samples to fit a line, got {L}")
    if mode == "global_ols":
        return kernels.ols_detrend(X)
    if mode == "end_to_end":
        return detrend_end_to_end(X)
    return X.copy(), np.zeros((B, C)), np.zeros((B, C))


def rfft(signal: np.ndarray) -> np.ndarray:
    """One-sided forward DFT, unnormalised: ``Z_k = sum_t x_t exp(-2 pi i k t / L)``."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape[0] < 2:
        raise InsufficientDataError("rfft needs at least 2 samples")
    return np.fft.rfft(signal, axis=0)


def irfft(Z: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`rfft` for a length-``n`` real signal (applies ``1/n``)."""
    return np.fft.irfft(Z, n=n, axis=0)


def log_normalize(A: np.ndarray, eps: float = 1e-8, joint: bool = False) -> np.ndarray:
    """Per-channel min-max scaling of ``log(1 + A)`` into ``[0, 1)``."""
    A = np.asarray(A, dtype=np.float64)
    Lg = np.log1p(A)
    axis = None if joint else 0
    lo = Lg.min(axis=axis, keepdims=True)
    hi = Lg.max(axis=axis, keepdims=True)
    return (Lg - lo) / (hi - lo + eps)


def spectral_flatness(A: np.ndarray, eps: float = 1e-8, exclude_dc: bool = False):
    """Geometric over arithmetic mean of amplitudes floored at ``eps``.

    Works along axis 0, so a ``[K, C]`` matrix yields one value per channel.
    """
    Af = np.maximum(np.asarray(A, dtype=np.float64), eps)
    if exclude_dc and Af.shape[0] > 1:
        Af = Af[1:]
    ratio = np.exp(np.log(Af).mean(axis=0)) / Af.mean(axis=0)
    # AM >= GM, with equality exactly when all amplitudes agree; rounding would
    # otherwise leave a flat spectrum one ulp away from 1
    flat = np.ptp(Af, axis=0) == 0
    return np.where(flat, 1.0, np.minimum(ratio, 1.0))


def softplus(a):
    return np.logaddexp(0.0, a)


def soft_mask(A_hat: np.ndarray, sfm, params: ScorerParams, use_sfm: bool = True):
    """``tau = sigmoid(w_s * sfm + b_s)``; ``M = sigmoid(softplus(alpha) * (A_hat - tau))``."""
    sfm = np.asarray(sfm, dtype=np.float64)
    u = params.w_s * sfm + params.b_s if use_sfm else np.full_like(sfm, params.b_s)
    tau = sigmoid(u)
    M = sigmoid(softplus(params.alpha) * (np.asarray(A_hat) - tau))
    return M, tau


# -- batch scorer ------------------------------------------------------------

@dataclass
class ScoreCache:
    X: np.ndarray
    xd: np.ndarray
    w: np.ndarray
    b: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    A_hat: np.ndarray
    sfm: np.ndarray
    tau: np.ndarray
    M: np.ndarray
    residual: np.ndarray
    scores: np.ndarray
    params: ScorerParams
    options: ScorerOptions = field(default=DEFAULT_OPTIONS)

    @property
    def reconstruction(self) -> np.ndarray:
        return self.X - self.residual


def score_batch(X: np.ndarray, params: ScorerParams,
                options: ScorerOptions = DEFAULT_OPTIONS) -> ScoreCache:
    """Noise scores for a batch ``X [B, L, C]``; returns the cache with ``.scores``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected [B, L, C], got shape {X.shape}")
    L = X.shape[1]
    if L < 4:
        raise InsufficientDataError(f"noise scoring needs L >= 4, got {L}")
    xd, w, b = _detrend_batch(X, options.detrend)
    Z = np.fft.rfft(xd, axis=1)
    A = np.abs(Z)
    A_hat, sfm, tau, M = kernels.spectral_gate(
        A, params.alpha, params.w_s, params.b_s, params.eps,
        options.lognorm, options.joint_norm, options.use_sfm, options.exclude_dc)
    rec_d = np.fft.irfft(Z * M, n=L, axis=1)
    # the trend is added back to both x and x', so x - x' is the detrended residual
    residual = xd - rec_d
    scores = np.abs(residual).mean(axis=(1, 2))
    return ScoreCache(X, xd, w, b, Z, A, A_hat, sfm, tau, M, residual, scores, params, options)


def _hermitian_weights(L: int) -> np.ndarray:
    K = L // 2 + 1
    c = np.full(K, 2.0)
    c[0] = 1.0
    if L % 2 == 0:
        c[-1] = 1.0
    return c


def score_batch_backward(cache: ScoreCache, d_scores) -> np.ndarray:
    """Gradient of ``sum_i d_scores[i] * s_i`` w.r.t. ``(alpha, w_s, b_s)``."""
    d_scores = np.asarray(d_scores, dtype=np.float64)
    B, L, C = cache.X.shape
    params, opts = cache.params, cache.options
    # s_i = mean |r|, r = xd - irfft(Z * M); sign(0) = 0 is the subgradient choice
    g_rec = -(d_scores / (L * C))[:, None, None] * np.sign(cache.residual)
    G = np.fft.rfft(g_rec, axis=1)
    c = _hermitian_weights(L)[None, :, None]
    dM = (c / L) * np.real(cache.Z * np.conj(G))
    dz = dM * cache.M * (1.0 - cache.M)
    sharp = softplus(params.alpha)
    tau = cache.tau[:, None, :]
    d_alpha = np.sum(dz * (cache.A_hat - tau)) * sigmoid(params.alpha)
    d_tau = -sharp * dz.sum(axis=1)
    du = d_tau * cache.tau * (1.0 - cache.tau)
    d_ws = np.sum(du * cache.sfm) if opts.use_sfm else 0.0
    d_bs = np.sum(du)
    return np.array([d_alpha, d_ws, d_bs])


# -- single-window API -------------------------------------------------------

def noise_score(x: np.ndarray, params: ScorerParams = ScorerParams(),
                options: ScorerOptions = DEFAULT_OPTIONS) -> NoiseScoreResult:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    cache = score_batch(x[None], params, options)
    dec = SpectralDecomposition(cache.w[0], cache.b[0], cache.Z[0], cache.A[0],
                                cache.A_hat[0], cache.sfm[0], cache.tau[0], cache.M[0])
    return NoiseScoreResult(float(cache.scores[0]), cache.reconstruction[0], dec)


def scorer_backward(x: np.ndarray, params: ScorerParams = ScorerParams(), ds: float = 1.0,
                    options: ScorerOptions = DEFAULT_OPTIONS):
    """Returns ``(d_alpha, d_w_s, d_b_s)`` for upstream gradient ``ds``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    cache = score_batch(x[None], params, options)
    return tuple(float(g) for g in score_batch_backward(cache, [ds]))
