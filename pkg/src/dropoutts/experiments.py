"""Experiment drivers shared by the CLI: Synth-12 training runs, paradox sweep, ablations."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .forecaster import TrainConfig, WindowSet, evaluate, train
from .series import Normalizer, SplitSpec, TimeSeries, chrono_split, window_arrays
from .spectral import ScorerOptions, ScorerParams
from .synth import LEVELS, SynthDataset, build_synth12

FIXED_RATES = (0.05, 0.1, 0.3, 0.5)
GAMMA_GRID = (0.5, 1.0, 5.0, 10.0)

# (name, detrend, lognorm, use_sfm) in the order of the ablation table
ABLATIONS = (
    ("minimal", "none", False, False),
    ("wo_detrend_norm", "none", False, True),
    ("wo_detrend", "none", True, True),
    ("simple_detrend", "end_to_end", True, True),
    ("wo_spectral_norm", "global_ols", False, True),
    ("wo_sfm_anchor", "global_ols", True, False),
    ("full", "global_ols", True, True),
)


@dataclass(frozen=True)
class DataConfig:
    """Window/split settings for Synth-12 experiments.

    ``T`` truncates the generated series (desk-scale runs); ``stride`` thins
    the training windows.
    """

    T: int = 33_600
    C: int = 7
    L: int = 96
    H: int = 24
    stride: int = 1
    eval_stride: int = 1
    ratios: tuple = (0.7, 0.1, 0.2)
    per_channel: bool = True


@dataclass
class PreparedData:
    train: WindowSet
    val: WindowSet
    test: WindowSet
    normalizer: Normalizer


def prepare_windows(noisy: TimeSeries, clean: Optional[TimeSeries], cfg: DataConfig) -> PreparedData:
    """Chronological split, z-score fit on the training split, then windowing.

    Inputs and training targets come from ``noisy`` (missing cells become 0 after
    normalisation). ``clean`` supplies the ``Y_clean`` targets for evaluation.
    """
    spec = SplitSpec(tuple(cfg.ratios))
    parts = chrono_split(noisy, spec, min_length=cfg.L + cfg.H)
    norm = Normalizer.fit(parts[0], cfg.per_channel)
    clean_parts = chrono_split(clean, spec, min_length=cfg.L + cfg.H) if clean is not None else None
    sets = []
    for i, part in enumerate(parts):
        stride = cfg.stride if i == 0 else cfg.eval_stride
        v = norm.transform(part).values
        X, Y, _ = window_arrays(v, cfg.L, cfg.H, stride)
        Yc = None
        if clean_parts is not None:
            _, Yc, _ = window_arrays(norm.transform_values(clean_parts[i].values), cfg.L, cfg.H, stride)
        sets.append(WindowSet(X, Y, Yc))
    return PreparedData(sets[0], sets[1], sets[2], norm)


# Desk-scale defaults for the paradox and ablation sweeps: a short series and a
# wide hidden layer, so the MLP can overfit the noise and dropout matters.
DESK_DATA = DataConfig(T=5_000, stride=2, eval_stride=4)
DESK_TRAIN = TrainConfig(epochs=60, hidden=256, patience=10)


def synth_data(seed: int, level: float, cfg: DataConfig) -> PreparedData:
    ds = build_synth12(seed, level, T=cfg.T, C=cfg.C)
    return prepare_windows(ds.noisy, ds.clean, cfg)


def run_once(data: PreparedData, config: TrainConfig):
    """Train on ``data.train`` (early stopping on noisy validation) and score the test split against clean targets."""
    val = WindowSet(data.val.X, data.val.Y)
    model, scorer, report = train(data.train, val, config)
    test = evaluate(model, data.test, use_clean=True)
    return model, scorer, report, test


def mode_config(base: TrainConfig, mode: str, p: float = 0.1, gamma: Optional[float] = None,
                options: Optional[ScorerOptions] = None) -> TrainConfig:
    scorer = base.scorer if gamma is None else replace(base.scorer, gamma=gamma)
    return replace(base, dropout_mode=mode, fixed_p=p if mode == "fixed" else base.fixed_p,
                   scorer=scorer, scorer_options=options or base.scorer_options)


def paradox_sweep(base: TrainConfig, data_cfg: DataConfig, seeds: Iterable[int],
                  levels=LEVELS, rates=FIXED_RATES, gamma: Optional[float] = None,
                  data_seed: Optional[int] = None):
    """Test MSE (clean targets) for fixed rates and adaptive dropout per level and seed.

    Returns rows ``(level, config_name, seed, mse, mae, epochs_run)``. Data is
    generated once per level from ``data_seed`` (default: the base config seed)
    so all configurations see identical windows.
    """
    rows = []
    seeds = list(seeds)
    dseed = base.seed if data_seed is None else data_seed
    for level in levels:
        data = synth_data(dseed, level, data_cfg)
        configs = [(f"fixed_{p:g}", mode_config(base, "fixed", p)) for p in rates]
        configs.append(("adaptive", mode_config(base, "adaptive", gamma=gamma)))
        for name, cfg in configs:
            for s in seeds:
                _, _, rep, test = run_once(data, replace(cfg, seed=s))
                rows.append((level, name, s, test.mse, test.mae, rep.epochs_run))
    return rows


def ablation_sweep(base: TrainConfig, data_cfg: DataConfig, seeds: Iterable[int], levels=LEVELS,
                   variants=ABLATIONS, data_seed: Optional[int] = None):
    """Rows ``(level, variant, seed, mse, mae)`` for adaptive runs under each scorer variant."""
    rows = []
    seeds = list(seeds)
    dseed = base.seed if data_seed is None else data_seed
    for level in levels:
        data = synth_data(dseed, level, data_cfg)
        for name, detrend, lognorm, use_sfm in variants:
            opts = ScorerOptions(detrend=detrend, lognorm=lognorm, use_sfm=use_sfm)
            cfg = mode_config(base, "adaptive", options=opts)
            for s in seeds:
                _, _, _, test = run_once(data, replace(cfg, seed=s))
                rows.append((level, name, s, test.mse, test.mae))
    return rows


def mean_table(rows, key_cols=(0, 1), value_col=3):
    """``{(level, name): mean}`` over seeds."""
    acc: dict = {}
    for r in rows:
        acc.setdefault(tuple(r[i] for i in key_cols), []).append(r[value_col])
    return {k: float(np.mean(v)) for k, v in acc.items()}
