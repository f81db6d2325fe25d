"""Synthetic benchmark: four clean regimes, three corruption types, five intensities.

The composite generator's coefficients are ours (documented in
``COMPOSITE_DEFAULTS``); the layered noise is calibrated so each intensity level
reproduces a target SNR.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .series import TimeSeries, write_csv
from .spectral import spectral_flatness

LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)
TARGET_SNR_DB = {0.1: 23.77, 0.3: 16.57, 0.5: 12.39, 0.7: 9.54, 0.9: 7.39}
REGIMES = ("periodic", "trend_seasonal", "chirp", "am", "composite")
PROFILES = ("gaussian", "heavy_tail", "missing", "layered")
DEFAULT_T = 33_600
DEFAULT_C = 7
SFM_WINDOW = 96

COMPOSITE_DEFAULTS = {
    # smoothed random walk: N(0, rw_step) increments, moving average of width rw_smooth
    "rw_step": 0.05,
    "rw_smooth": 50,
    "trend_weight": 1.0,
    # quasi-periodic cycles (periods in samples), phase drift as a slow random walk
    "periods": (24.0, 168.0),
    "cycle_amps": (1.0, 0.6),
    "phase_drift_step": 0.002,
    # repeating linear chirp: sweeps f_lo..f_hi cycles/sample every chirp_period samples
    "chirp_amp": 0.35,
    "chirp_period": 336,
    "chirp_f": (1 / 48, 1 / 12),
    # amplitude modulation
    "am_amp": 0.4,
    "am_mu": 0.5,
    "am_fm": 1 / 672,
    "am_fc": 1 / 8,
    # per-channel multiplicative jitter on amplitudes / frequencies
    "jitter": 0.15,
}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SignalSpec:
    """Recipe for a clean signal.

    Frequencies are in cycles per unit time, with time ``t = n * dt``.
    ``components`` holds ``(A, f, phase)`` triples for ``periodic`` and
    ``(A, f)`` pairs (harmonics) for ``trend_seasonal``.
    """

    regime: str = "composite"
    components: tuple = ((1.0, 1 / 24, 0.0),)
    slope: float = 0.0
    intercept: float = 0.0
    amplitude: float = 1.0
    f0: float = 0.01
    sweep_rate: float = 0.0
    mu: float = 0.5
    f_m: float = 1 / 200
    f_c: float = 1 / 10
    dt: float = 1.0
    composite: Optional[dict] = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise SynthError(f"regime must be one of {REGIMES}, got {self.regime!r}")


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption recipe.

    ``sigma`` is the intensity level; ``sigma_eff`` is the absolute noise scale
    (computed by calibration when left ``None``). ``spike_rate`` defaults to 1
    for the pure heavy-tail profile and 0.02 inside the layered profile.
    """

    profile: str = "layered"
    sigma: float = 0.5
    sigma_eff: Optional[float] = None
    nu: float = 2.5
    missing_p: Optional[float] = None
    spike_rate: Optional[float] = None

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise SynthError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if not self.sigma > 0:
            raise SynthError("sigma must be positive")
        if self.nu <= 2:
            raise SynthError("nu must exceed 2 for finite variance")
        if not (0.0 <= self.resolved_missing_p < 1.0):
            raise SynthError(f"missing_p must lie in [0, 1), got {self.resolved_missing_p}")

    @property
    def resolved_missing_p(self) -> float:
        if self.missing_p is not None:
            return float(self.missing_p)
        if self.profile == "layered":
            return 0.01 * self.sigma
        if self.profile == "missing":
            return 0.1 * self.sigma
        return 0.0

    @property
    def resolved_spike_rate(self) -> float:
        if self.spike_rate is not None:
            return float(self.spike_rate)
        return {"heavy_tail": 1.0, "layered": 0.02}.get(self.profile, 0.0)


@dataclass(frozen=True)
class DatasetStats:
    snr_db: Optional[float]
    sfm_clean: float
    sfm_noisy: float
    mse_vs_ground_truth: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SynthDataset:
    clean: TimeSeries
    noisy: TimeSeries
    signal: SignalSpec
    noise: NoiseSpec
    seed: int
    stats: DatasetStats

    @property
    def mask(self) -> np.ndarray:
        return self.noisy.missing

    def provenance(self) -> dict:
        return {
            "schema": "dropoutts.synth/1",
            "seed": self.seed,
            "T": self.clean.T,
            "C": self.clean.C,
            "signal": _jsonable(asdict(self.signal)),
            "noise": _jsonable({**asdict(self.noise),
                                "missing_p": self.noise.resolved_missing_p,
                                "spike_rate": self.noise.resolved_spike_rate}),
            "stats": self.stats.to_dict(),
        }

    def write(self, out_dir: str | Path) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(self.clean, out / "clean.csv")
        write_csv(self.noisy, out / "noisy.csv")
        mask = TimeSeries(self.noisy.missing.astype(np.float64), self.noisy.channel_names)
        write_csv(mask, out / "mask.csv")
        prov = self.provenance()
        (out / "stats.json").write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
        return prov


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _rng(*path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in path]))


# -- clean signals ---------------------------------------------------------------

def _check_nyquist(f_max: float, dt: float, what: str):
    nyq = 0.5 / dt
    if f_max >= nyq:
        raise SynthError(f"{what}: frequency {f_max:g} is not below Nyquist {nyq:g}")


def smoothed_random_walk(n: int, step: float, width: int, rng: np.random.Generator) -> np.ndarray:
    """Cumulative Gaussian steps passed through a width-``width`` moving average."""
    walk = np.cumsum(rng.normal(0.0, step, n + width - 1))
    kernel = np.full(width, 1.0 / width)
    return np.convolve(walk, kernel, mode="valid")


def _single_regime(spec: SignalSpec, t: np.ndarray) -> np.ndarray:
    if spec.regime == "periodic":
        out = np.zeros_like(t)
        for A, f, phi in spec.components:
            _check_nyquist(f, spec.dt, "periodic component")
            out += A * np.sin(2 * np.pi * f * t + phi)
        return out
    if spec.regime == "trend_seasonal":
        out = spec.slope * t + spec.intercept
        for comp in spec.components:
            A, f = comp[0], comp[1]
            _check_nyquist(f, spec.dt, "seasonal harmonic")
            out = out + A * np.sin(2 * np.pi * f * t)
        return out
    if spec.regime == "chirp":
        _check_nyquist(max(spec.f0, spec.f0 + spec.sweep_rate * t[-1]), spec.dt, "chirp")
        return spec.amplitude * np.sin(2 * np.pi * (spec.f0 * t + 0.5 * spec.sweep_rate * t ** 2))
    if spec.regime == "am":
        _check_nyquist(spec.f_c + spec.f_m, spec.dt, "AM carrier")
        return (1 + spec.mu * np.sin(2 * np.pi * spec.f_m * t)) * np.sin(2 * np.pi * spec.f_c * t)
    raise SynthError(f"not a single regime: {spec.regime}")


def _composite_channel(T: int, cfg: dict, rng: np.random.Generator) -> np.ndarray:
    jit = cfg["jitter"]

    def j():
        return 1.0 + jit * rng.uniform(-1.0, 1.0)

    n = np.arange(T, dtype=np.float64)
    trend = cfg["trend_weight"] * smoothed_random_walk(T, cfg["rw_step"], cfg["rw_smooth"], rng)
    cycles = np.zeros(T)
    for period, amp in zip(cfg["periods"], cfg["cycle_amps"]):
        drift = np.cumsum(rng.normal(0.0, cfg["phase_drift_step"], T))
        cycles += amp * j() * np.sin(2 * np.pi * n / period + rng.uniform(0, 2 * np.pi) + drift)
    # repeating sweep: frequency climbs linearly within each chirp period
    P = cfg["chirp_period"]
    f_lo, f_hi = cfg["chirp_f"]
    _check_nyquist(f_hi, 1.0, "composite chirp")
    tau = (n + rng.integers(0, P)) % P
    chirp = cfg["chirp_amp"] * j() * np.sin(2 * np.pi * (f_lo * tau + 0.5 * (f_hi - f_lo) / P * tau ** 2))
    fc = cfg["am_fc"] * j()
    _check_nyquist(fc + cfg["am_fm"], 1.0, "composite AM")
    am = cfg["am_amp"] * (1 + cfg["am_mu"] * np.sin(2 * np.pi * cfg["am_fm"] * n)) \
        * np.sin(2 * np.pi * fc * n + rng.uniform(0, 2 * np.pi))
    x = trend + cycles + chirp + am
    return (x - x.mean()) / x.std()


def gen_signal(spec: SignalSpec, T: int, C: int = 1, seed: int = 0) -> TimeSeries:
    """Clean ``[T, C]`` series for one regime.

    Single regimes are deterministic formulas (every channel identical);
    ``composite`` draws channel-specific parameters from ``seed`` and
    standardises each channel to zero mean and unit variance.
    """
    if T < 2 or C < 1:
        raise SynthError(f"need T >= 2 and C >= 1, got T={T}, C={C}")
    if spec.regime == "composite":
        cfg = {**COMPOSITE_DEFAULTS, **(spec.composite or {})}
        cols = [_composite_channel(T, cfg, _rng(seed, 0, c)) for c in range(C)]
        values = np.stack(cols, axis=1)
    else:
        t = np.arange(T, dtype=np.float64) * spec.dt
        values = np.repeat(_single_regime(spec, t)[:, None], C, axis=1)
    return TimeSeries(values, tuple(f"c{i}" for i in range(C)), dt=spec.dt)


# -- noise ---------------------------------------------------------------------

def calibrate_sigma(clean: TimeSeries | np.ndarray, target_snr_db: float) -> float:
    """Gaussian std giving ``target_snr_db`` against the clean signal's RMS."""
    v = clean.values if isinstance(clean, TimeSeries) else np.asarray(clean, dtype=np.float64)
    rms = math.sqrt(float(np.mean(v * v)))
    if rms == 0.0:
        raise SynthError("cannot calibrate against a zero-power clean signal")
    return rms * 10.0 ** (-target_snr_db / 20.0)


def calibrate_layered_sigma(clean: TimeSeries | np.ndarray, target_snr_db: float,
                            spike_rate: float, nu: float, missing_p: float) -> float:
    """Background std such that Gaussian + spikes + dropouts hit ``target_snr_db`` in expectation.

    Expected noise power per cell is
    ``(1 - m) * sigma**2 * (1 + r * nu / (nu - 2)) + m * P`` with ``P`` the clean
    power, ``r`` the spike rate and ``m`` the missing probability.
    """
    v = clean.values if isinstance(clean, TimeSeries) else np.asarray(clean, dtype=np.float64)
    P = float(np.mean(v * v))
    if P == 0.0:
        raise SynthError("cannot calibrate against a zero-power clean signal")
    budget = P * 10.0 ** (-target_snr_db / 10.0) - missing_p * P
    if budget <= 0:
        raise SynthError(f"missing rate {missing_p} alone exceeds the {target_snr_db} dB noise budget")
    return math.sqrt(budget / ((1.0 - missing_p) * (1.0 + spike_rate * nu / (nu - 2.0))))


def apply_noise(clean: TimeSeries, spec: NoiseSpec, seed: int = 0, sigma_eff: Optional[float] = None) -> TimeSeries:
    """Corrupt ``clean``; missing cells are returned in the series' missing mask."""
    s = spec.sigma_eff if sigma_eff is None else sigma_eff
    if s is None:
        raise SynthError("apply_noise needs a calibrated sigma_eff")
    rng = _rng(seed, 1)
    x = clean.values.copy()
    shape = x.shape
    missing = np.zeros(shape, dtype=bool)
    prof = spec.profile
    if prof in ("gaussian", "layered") and s > 0:
        x = x + rng.normal(0.0, s, shape)
    if prof in ("heavy_tail", "layered") and s > 0:
        rate = spec.resolved_spike_rate
        where = rng.random(shape) < rate if rate < 1.0 else np.ones(shape, dtype=bool)
        x = x + np.where(where, s * rng.standard_t(spec.nu, shape), 0.0)
    if prof in ("missing", "layered"):
        mp = spec.resolved_missing_p
        if mp > 0:
            missing = rng.random(shape) < mp
    return TimeSeries(x, clean.channel_names, missing | clean.missing, clean.dt)


# -- statistics ----------------------------------------------------------------

def windowed_sfm(values: np.ndarray, window: int = SFM_WINDOW, eps: float = 1e-8,
                 power: bool = True) -> float:
    """Mean SFM over non-overlapping windows and channels.

    ``power=True`` measures flatness of ``|Z|**2`` (the usual Wiener-entropy
    form); ``power=False`` uses the amplitude spectrum as the scorer does.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0] // window
    if n == 0:
        raise SynthError(f"series shorter than one SFM window ({window})")
    blocks = v[:n * window].reshape(n, window, v.shape[1])
    A = np.abs(np.fft.rfft(blocks, axis=1))
    if power:
        A = A * A
    sfm = np.stack([spectral_flatness(A[i], eps) for i in range(n)])
    return float(sfm.mean())


def dataset_stats(clean: TimeSeries, noisy: TimeSeries, window: int = SFM_WINDOW) -> DatasetStats:
    """SNR (dB), windowed clean/noisy SFM and injected MSE.

    Missing cells count as ``noisy = 0``; identical series give ``snr_db=None``
    (infinite SNR).
    """
    if clean.values.shape != noisy.values.shape:
        raise SynthError("clean and noisy shapes differ")
    c = clean.values
    n = np.where(noisy.missing, 0.0, noisy.values)
    noise = n - c
    p_noise = float(np.sum(noise * noise))
    snr = None if p_noise == 0.0 else 10.0 * math.log10(float(np.sum(c * c)) / p_noise)
    return DatasetStats(snr_db=snr, sfm_clean=windowed_sfm(c, window),
                        sfm_noisy=windowed_sfm(n, window),
                        mse_vs_ground_truth=float(np.mean(noise * noise)))


def _level_index(level: float) -> int:
    for i, lv in enumerate(LEVELS):
        if abs(level - lv) < 1e-9:
            return i
    raise SynthError(f"sigma level must be one of {LEVELS}, got {level}")


def build_synth12(seed: int = 0, sigma_level: float = 0.5, T: int = DEFAULT_T, C: int = DEFAULT_C,
                  composite: Optional[dict] = None, noise: Optional[NoiseSpec] = None) -> SynthDataset:
    """Composite clean signal plus layered noise calibrated to the level's target SNR.

    The clean signal depends only on ``seed``, so all levels share it.
    """
    li = _level_index(sigma_level)
    level = LEVELS[li]
    signal = SignalSpec(regime="composite", composite=composite)
    clean = gen_signal(signal, T, C, seed)
    spec = noise or NoiseSpec(profile="layered", sigma=level)
    s_eff = calibrate_layered_sigma(clean, TARGET_SNR_DB[level], spec.resolved_spike_rate
                                    if spec.profile in ("layered", "heavy_tail") else 0.0,
                                    spec.nu, spec.resolved_missing_p)
    spec = NoiseSpec(profile=spec.profile, sigma=level, sigma_eff=s_eff, nu=spec.nu,
                     missing_p=spec.missing_p, spike_rate=spec.spike_rate)
    noisy = apply_noise(clean, spec, seed=_seed_for(seed, li))
    return SynthDataset(clean, noisy, signal, spec, seed, dataset_stats(clean, noisy))


def _seed_for(seed: int, level_index: int) -> int:
    return int(np.random.SeedSequence([int(seed), 100 + level_index]).generate_state(1)[0])


def regime_grid(T: int = 2048, seed: int = 0, sigma_level: float = 0.5):
    """The 4 x 3 regime/corruption cross product, one channel each.

    Returns ``{(regime, profile): (clean, noisy)}``.
    """
    specs = {
        "periodic": SignalSpec("periodic", components=((1.0, 1 / 32, 0.0), (0.5, 1 / 8, 1.0))),
        "trend_seasonal": SignalSpec("trend_seasonal", components=((1.0, 1 / 48),),
                                     slope=2.0 / T, intercept=-1.0),
        "chirp": SignalSpec("chirp", f0=1 / 200, sweep_rate=(1 / 10 - 1 / 200) / T),
        "am": SignalSpec("am", mu=0.5, f_m=1 / 256, f_c=1 / 16),
    }
    out = {}
    for i, (name, spec) in enumerate(specs.items()):
        clean = gen_signal(spec, T, 1, seed)
        for j, prof in enumerate(("gaussian", "heavy_tail", "missing")):
            ns = NoiseSpec(profile=prof, sigma=sigma_level)
            s_eff = calibrate_sigma(clean, TARGET_SNR_DB.get(sigma_level, 12.39))
            out[(name, prof)] = (clean, apply_noise(clean, ns, seed=seed * 100 + i * 10 + j,
                                                    sigma_eff=s_eff))
    return out
