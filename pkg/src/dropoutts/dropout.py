"""Sample-adaptive dropout: batch rate mapping, keyed Bernoulli masks, STE application."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._kernels_py import sigmoid
from .errors import EmptyInputError, InvalidRateError, ShapeMismatchError
from .spectral import ScorerParams, softplus


@dataclass(frozen=True)
class ScoredBatch:
    scores: np.ndarray
    normalized: np.ndarray
    shaped: np.ndarray
    rates: np.ndarray
    batch_min: float
    batch_max: float


@dataclass(frozen=True)
class DropoutMask:
    keep: np.ndarray
    p: float
    seed: int


def batch_rate_map(scores, params: ScorerParams) -> ScoredBatch:
    """Min-max the scores within the batch, then ``p = p_min + (p_max - p_min) * tanh(s_hat * softplus(gamma))``.

    The batch min and max are constants for the backward pass.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise EmptyInputError("cannot map rates for an empty batch")
    lo, hi = float(s.min()), float(s.max())
    s_hat = (s - lo) / (hi - lo + params.eps)
    shaped = np.tanh(s_hat * softplus(params.gamma))
    rates = params.p_min + (params.p_max - params.p_min) * shaped
    return ScoredBatch(s, s_hat, shaped, rates, lo, hi)


def rate_map_backward(batch: ScoredBatch, d_p, params: ScorerParams):
    """Returns ``(d_gamma, d_scores)`` with the batch statistics detached."""
    d_p = np.asarray(d_p, dtype=np.float64).reshape(-1)
    slope = d_p * (params.p_max - params.p_min) * (1.0 - batch.shaped ** 2)
    d_gamma = float(np.sum(slope * batch.normalized) * sigmoid(params.gamma))
    d_scores = slope * softplus(params.gamma) / (batch.batch_max - batch.batch_min + params.eps)
    return d_gamma, d_scores


def _check_rate(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p >= 1.0) or np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise InvalidRateError(f"dropout rate must lie in [0, 1), got {p}")
    return p


def sample_mask(shape, p: float, seed: int, index: int = 0) -> DropoutMask:
    """Keep-mask with i.i.d. Bernoulli(1 - p) entries keyed by ``(seed, index)``."""
    p = float(_check_rate(p))
    shape = tuple(int(n) for n in np.atleast_1d(shape))
    n = int(np.prod(shape))
    keep = kernels.keep_mask(np.array([kernels.stream_key(seed, index)], dtype=np.uint64),
                             n, np.array([p]))
    return DropoutMask(keep.reshape(shape), p, int(seed))


def sample_masks(keys, n: int, rates) -> np.ndarray:
    """One mask row per sample: ``keys [B]`` (uint64), ``rates [B]`` -> uint8 ``[B, n]``."""
    rates = _check_rate(rates)
    return kernels.keep_mask(np.asarray(keys, dtype=np.uint64), int(n), rates)


def _broadcast_rate(p, features: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1 and features.ndim > 1:
        p = p.reshape((-1,) + (1,) * (features.ndim - 1))
    return p


def apply_ste_dropout(features, keep, p, train: bool = True) -> np.ndarray:
    """Inverted dropout ``H * B / (1 - p)`` in training, identity in evaluation.

    ``p`` is a scalar or one rate per leading-axis sample.
    """
    H = np.asarray(features, dtype=np.float64)
    if not train:
        return H
    keep = keep.keep if isinstance(keep, DropoutMask) else np.asarray(keep)
    if keep.shape != H.shape:
        raise ShapeMismatchError(f"mask shape {keep.shape} != feature shape {H.shape}")
    q = 1.0 - _broadcast_rate(_check_rate(p), H)
    return H * keep / q


def ste_backward(features, keep, p, d_out):
    """Backward of :func:`apply_ste_dropout` under the straight-through surrogate.

    The surrogate mask is ``B + ((1 - p) - detach(1 - p))``, which gives
    ``d out / d H = B / (1 - p)`` and ``d out / d p = H * (B / (1 - p)**2 - 1 / (1 - p))``.
    Returns ``(d_features, d_p)``; ``d_p`` has the shape of ``p``.
    """
    H = np.asarray(features, dtype=np.float64)
    keep = keep.keep if isinstance(keep, DropoutMask) else np.asarray(keep)
    p_arr = np.asarray(p, dtype=np.float64)
    q = 1.0 - _broadcast_rate(p_arr, H)
    d_out = np.asarray(d_out, dtype=np.float64)
    d_H = d_out * keep / q
    dp_elem = d_out * H * (keep / q ** 2 - 1.0 / q)
    if p_arr.ndim == 1 and H.ndim > 1:
        d_p = dp_elem.reshape(H.shape[0], -1).sum(axis=1)
    else:
        d_p = float(dp_elem.sum())
    return d_H, d_p


def ste_surrogate(features, keep, p, p_detached):
    """Forward value of the surrogate with ``p`` and its detached copy separated."""
    H = np.asarray(features, dtype=np.float64)
    keep = np.asarray(keep, dtype=np.float64)
    p = _broadcast_rate(p, H)
    pd = _broadcast_rate(p_detached, H)
    return H * (keep + ((1.0 - p) - (1.0 - pd))) / (1.0 - p)
