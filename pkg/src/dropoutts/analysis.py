"""Sparsity, SNR and detrending analyses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError
from .spectral import (DETREND_MODES, ScorerOptions, ScorerParams, _hermitian_weights, noise_score,
                       spectral_flatness)


class UndefinedCorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class SparsityReport:
    keep_fraction: float
    kept_bins: int
    correlation: float
    retained_energy: float
    threshold: float


@dataclass(frozen=True)
class DetrendBenchResult:
    scenario: str
    edge_mae: dict


def pearson(a, b) -> float:
    """Two-pass Pearson correlation; raises on zero variance."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size < 2:
        raise UndefinedCorrelationError("need two equal-length vectors with >= 2 points")
    da = a - a.mean()
    db = b - b.mean()
    sa, sb = math.sqrt(float(da @ da)), math.sqrt(float(db @ db))
    if sa == 0.0 or sb == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a zero-variance input")
    return float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))


def _ranked_bins(amplitude: np.ndarray) -> np.ndarray:
    # descending amplitude, ties -> lower bin index first. Amplitudes are compared
    # relative to the peak on a 1e-12 grid so rounding noise (e.g. after scaling
    # the input) cannot reorder bins that are equal in exact arithmetic.
    peak = float(amplitude.max()) if amplitude.size else 0.0
    key = np.round(amplitude / peak * 1e12) if peak > 0 else np.zeros_like(amplitude)
    return np.lexsort((np.arange(amplitude.size), -key))


def topk_reconstruct(series, keep_fraction: float, detrend: bool = True):
    """Hard spectral truncation: keep the ``ceil(keep_fraction * K)`` largest one-sided bins.

    With ``detrend`` the global OLS line is removed first and restored
    afterwards. Returns ``(reconstruction, SparsityReport)``.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInputError("empty series")
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    L = x.size
    if detrend and L >= 2:
        t = np.arange(L, dtype=np.float64)
        tc = t - t.mean()
        w = float(tc @ (x - x.mean())) / float(tc @ tc)
        trend = w * tc + x.mean()
    else:
        trend = np.zeros(L)
    Z = np.fft.rfft(x - trend)
    A = np.abs(Z)
    K = A.size
    k = min(K, int(math.ceil(keep_fraction * K - 1e-12)))
    keep = _ranked_bins(A)[:k]
    mask = np.zeros(K)
    mask[keep] = 1.0
    rec = np.fft.irfft(Z * mask, n=L) + trend
    energy = _hermitian_weights(L) * A * A
    total = float(energy.sum())
    retained = 1.0 if total == 0.0 else float(energy[keep].sum() / total)
    try:
        corr = pearson(rec, x)
    except UndefinedCorrelationError:
        corr = 1.0 if np.allclose(rec, x) else 0.0
    return rec, SparsityReport(keep_fraction, k, corr, min(retained, 1.0), float(A[keep].min()))


def sparsity_sweep(series, fractions=(0.01, 0.05, 0.10, 0.25, 1.0), detrend: bool = True):
    return [topk_reconstruct(series, f, detrend)[1] for f in fractions]


def estimate_snr(series, signal_fraction: float = 0.10) -> float:
    """Top-``signal_fraction`` bins count as signal, the rest as noise; returns dB."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size < 2 or not np.any(x):
        raise ValueError("SNR estimate needs a nonzero series")
    Z = np.fft.rfft(x)
    A = np.abs(Z)
    energy = _hermitian_weights(x.size) * A * A
    k = max(1, int(math.ceil(signal_fraction * A.size - 1e-12)))
    order = _ranked_bins(A)
    signal = float(energy[order[:k]].sum())
    noise = float(energy[order[k:]].sum())
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


def sfm_snr_correlation(points) -> float:
    """Pearson r over ``(sfm, snr_db)`` pairs (at least three)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise UndefinedCorrelationError("need at least 3 (sfm, snr_db) pairs")
    return pearson(pts[:, 0], pts[:, 1])


def spectral_profile(values, signal_fraction: float = 0.10):
    """``(sfm, snr_db)`` of a whole series, averaged over channels.

    Both numbers come from the same full-length amplitude spectrum, one pair
    per dataset.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    sfm = [float(spectral_flatness(np.abs(np.fft.rfft(v[:, c])))) for c in range(v.shape[1])]
    snr = [estimate_snr(v[:, c], signal_fraction) for c in range(v.shape[1])]
    return float(np.mean(sfm)), float(np.mean(snr))


def synth_profile_points(seed: int = 0, T: int = 33_600):
    """Seven ``(sfm, snr_db)`` points: the five Synth-12 levels plus clean periodic and AM series."""
    from .synth import LEVELS, SignalSpec, build_synth12, gen_signal

    pts = []
    for level in LEVELS:
        noisy = build_synth12(seed, level, T=T).noisy
        pts.append(spectral_profile(np.where(noisy.missing, 0.0, noisy.values)))
    for regime in ("periodic", "am"):
        pts.append(spectral_profile(gen_signal(SignalSpec(regime), T).values))
    return pts


# -- detrending benchmark --------------------------------------------------------

BENCH_L = 96


def canonical_scenarios(L: int = BENCH_L) -> dict:
    """``{name: (observed, clean)}`` for the four boundary stress tests.

    Parameters are fixed here so the benchmark is reproducible.
    """
    t = np.arange(L, dtype=np.float64)
    season = 0.5 * np.sin(2 * np.pi * t / 24)

    clean1 = 0.05 * t + season
    obs1 = clean1.copy()
    obs1[0] += 5.0 * np.sqrt(np.mean(clean1 ** 2))

    # period 36 does not divide L; the phase maximises |x[L-1] - x[0]|
    clean2 = np.sin(2 * np.pi * t / 36 + 1.178)
    obs2 = clean2.copy()

    u = (t - L / 2) / (L / 2)
    clean3 = 2.0 * u ** 2 + season
    obs3 = clean3.copy()
    obs3[-1] += 1.5

    clean4 = np.where(t >= L // 3, 2.0, 0.0) + season
    obs4 = clean4.copy()
    obs4[-1] = 0.0
    return {
        "start_outlier": (obs1, clean1),
        "phase_mismatch": (obs2, clean2),
        "quadratic_endpoint_noise": (obs3, clean3),
        "regime_shift_sensor_failure": (obs4, clean4),
    }


def edge_mae(reconstruction, reference, frac: float = 0.05) -> float:
    """Mean absolute error over the first and last ``ceil(frac * L)`` samples."""
    r = np.asarray(reconstruction, dtype=np.float64).ravel()
    ref = np.asarray(reference, dtype=np.float64).ravel()
    n = int(math.ceil(frac * r.size))
    idx = np.r_[0:n, r.size - n:r.size]
    return float(np.mean(np.abs(r[idx] - ref[idx])))


def detrend_bench(scenarios: dict | None = None, params: ScorerParams = ScorerParams()):
    """Edge-MAE of the scorer's reconstruction against the clean signal, per detrend strategy."""
    scenarios = scenarios if scenarios is not None else canonical_scenarios()
    out = []
    for name, (obs, clean) in scenarios.items():
        errs = {}
        for mode in DETREND_MODES:
            rec = noise_score(obs, params, ScorerOptions(detrend=mode)).reconstruction[:, 0]
            errs[mode] = edge_mae(rec, clean)
        out.append(DetrendBenchResult(name, errs))
    return out
