"""Single-hidden-layer MLP forecaster with one (adaptive) dropout site.

Everything here is differentiated by hand so the whole loop, including the
scorer parameters, can be checked against finite differences.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .dropout import (apply_ste_dropout, batch_rate_map, rate_map_backward, sample_masks,
                      ste_backward)
from .errors import ConfigError, DivergenceError, ShapeMismatchError
from .spectral import (DEFAULT_OPTIONS, ScorerOptions, ScorerParams, score_batch,
                       score_batch_backward)

MODES = ("none", "fixed", "adaptive")
PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> "MlpModel":
        if n_hidden < 1:
            raise ValueError("hidden width must be >= 1")
        k1, k2 = 1.0 / np.sqrt(n_in), 1.0 / np.sqrt(n_hidden)
        return cls(rng.uniform(-k1, k1, (n_hidden, n_in)), rng.uniform(-k1, k1, n_hidden),
                   rng.uniform(-k2, k2, (n_out, n_hidden)), rng.uniform(-k2, k2, n_out))

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> "MlpModel":
        return MlpModel(*(getattr(self, k).copy() for k in PARAM_NAMES))

    def to_bytes(self) -> bytes:
        """Little-endian float64 dump: header ``[n_in, d, n_out]`` (int64) then W1, b1, W2, b2 row-major."""
        head = np.array([self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]], dtype="<i8")
        body = b"".join(np.ascontiguousarray(getattr(self, k), dtype="<f8").tobytes()
                        for k in PARAM_NAMES)
        return head.tobytes() + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "MlpModel":
        n_in, d, n_out = np.frombuffer(data[:24], dtype="<i8")
        flat = np.frombuffer(data[24:], dtype="<f8")
        sizes = [d * n_in, d, n_out * d, n_out]
        parts = np.split(flat, np.cumsum(sizes)[:-1])
        return cls(parts[0].reshape(d, n_in).copy(), parts[1].copy(),
                   parts[2].reshape(n_out, d).copy(), parts[3].copy())


@dataclass
class ForwardCache:
    x: np.ndarray
    h: np.ndarray
    keep: Optional[np.ndarray]
    p: Optional[np.ndarray]
    train: bool


def forward(model: MlpModel, x_flat: np.ndarray, dropout=None):
    """``y = W2 @ drop(tanh(W1 @ x + b1)) + b2`` for a batch ``x_flat [B, L*C]``.

    ``dropout`` is ``None`` or ``(keep [B, d], p [B] or scalar, train)``.
    Returns ``(y_hat, cache)``.
    """
    x = np.asarray(x_flat, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None]
    if x.shape[1] != model.W1.shape[1]:
        raise ShapeMismatchError(f"input width {x.shape[1]} != model input {model.W1.shape[1]}")
    h = np.tanh(x @ model.W1.T + model.b1)
    keep = p = None
    train = False
    hp = h
    if dropout is not None:
        keep, p, train = dropout
        keep = np.asarray(keep).reshape(h.shape)
        p = np.broadcast_to(np.asarray(p, dtype=np.float64), (h.shape[0],))
        hp = apply_ste_dropout(h, keep, p, train)
    y = hp @ model.W2.T + model.b2
    cache = ForwardCache(x, h, keep, p, train)
    return (y[0] if squeeze else y), cache


def backward(model: MlpModel, cache: ForwardCache, d_yhat: np.ndarray):
    """Returns ``(grads, d_p [B], d_x)``; ``d_p`` is zero without a training-mode dropout site."""
    dy = np.asarray(d_yhat, dtype=np.float64).reshape(cache.x.shape[0], -1)
    use_drop = cache.keep is not None and cache.train
    if use_drop:
        hp = apply_ste_dropout(cache.h, cache.keep, cache.p, True)
    else:
        hp = cache.h
    grads = {"W2": dy.T @ hp, "b2": dy.sum(axis=0)}
    d_hp = dy @ model.W2
    if use_drop:
        d_h, d_p = ste_backward(cache.h, cache.keep, cache.p, d_hp)
    else:
        d_h, d_p = d_hp, np.zeros(cache.x.shape[0])
    d_a = d_h * (1.0 - cache.h ** 2)
    grads["W1"] = d_a.T @ cache.x
    grads["b1"] = d_a.sum(axis=0)
    d_x = d_a @ model.W1
    return grads, d_p, d_x


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k], dtype=np.float64)
            state.v[k] = np.zeros_like(params[k], dtype=np.float64)
        p = params[k]
        if isinstance(p, np.ndarray) and p.dtype == np.float64 and p.flags.c_contiguous:
            kernels.adam_update(p.reshape(-1), g, state.m[k].reshape(-1), state.v[k].reshape(-1),
                                lr, beta1, beta2, eps, bc1, bc2)
            continue
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        params[k] -= lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + eps)


# -- data / config -------------------------------------------------------------

@dataclass
class WindowSet:
    """Stacked windows: ``X [N, L, C]`` inputs, ``Y [N, H, C]`` targets.

    ``Y_clean`` (optional) holds noise-free targets for clean-target evaluation.
    """

    X: np.ndarray
    Y: np.ndarray
    Y_clean: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0] or self.X.shape[0] == 0:
            raise ShapeMismatchError(f"bad window set shapes {self.X.shape}, {self.Y.shape}")

    def __len__(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    dropout_mode: str = "adaptive"
    fixed_p: float = 0.1
    hidden: int = 64
    patience: int = 5
    scorer: ScorerParams = ScorerParams()
    scorer_options: ScorerOptions = DEFAULT_OPTIONS
    normalization: str = "per_channel"
    record_rates: bool = False

    def __post_init__(self):
        if self.dropout_mode not in MODES:
            raise ConfigError(f"dropout_mode must be one of {MODES}, got {self.dropout_mode!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.dropout_mode == "fixed" and not (0.0 <= self.fixed_p < 1.0):
            raise ConfigError(f"fixed_p must lie in [0, 1), got {self.fixed_p}")
        if self.epochs < 1 or self.hidden < 1:
            raise ConfigError("epochs and hidden must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scorer"] = self.scorer.to_dict()
        return d

    def config_hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class MetricsReport:
    mse: float
    mae: float
    horizon: int
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0
    wall_ms: float = 0.0
    config_hash: str = ""
    mode: str = ""
    final_scorer_params: Optional[dict] = None
    rate_log: list = field(default_factory=list)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "config_hash": self.config_hash,
            "mode": self.mode,
            "horizons": [{"h": self.horizon, "mse": self.mse, "mae": self.mae}],
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "train_loss": list(self.train_loss),
            "val_loss": list(self.val_loss),
            "final_scorer_params": self.final_scorer_params,
        }
        if include_timing:
            d["wall_ms"] = self.wall_ms
        return d


# -- training ------------------------------------------------------------------

def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


STREAM_INIT, STREAM_ORDER, STREAM_DROPOUT = 1, 2, 3


def mse_loss(y_hat, y):
    diff = y_hat - y
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class StepResult:
    loss: float
    grads: dict
    scorer_grad: np.ndarray
    rates: Optional[np.ndarray]
    scored: object = None


def train_step(model: MlpModel, X: np.ndarray, Y: np.ndarray, config: TrainConfig,
               scorer: ScorerParams, keys: np.ndarray) -> StepResult:
    """Forward + backward for one mini-batch; no parameter update.

    ``keys`` are the per-sample uint64 mask-stream keys.
    """
    B = X.shape[0]
    x_flat = X.reshape(B, -1)
    y_flat = Y.reshape(B, -1)
    scorer_grad = np.zeros(4)
    rates = None
    sb = cache_s = None
    if config.dropout_mode == "none":
        y_hat, cache = forward(model, x_flat)
    else:
        if config.dropout_mode == "fixed":
            rates = np.full(B, config.fixed_p)
        else:
            cache_s = score_batch(X, scorer, config.scorer_options)
            sb = batch_rate_map(cache_s.scores, scorer)
            rates = sb.rates
        keep = sample_masks(keys, model.hidden, rates)
        y_hat, cache = forward(model, x_flat, (keep, rates, True))
    loss, d_y = mse_loss(y_hat, y_flat)
    grads, d_p, _ = backward(model, cache, d_y)
    if sb is not None:
        d_gamma, d_scores = rate_map_backward(sb, d_p, scorer)
        scorer_grad[:3] = score_batch_backward(cache_s, d_scores)
        scorer_grad[3] = d_gamma
    return StepResult(loss, grads, scorer_grad, rates, sb)


def predict(model: MlpModel, X: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Evaluation-mode forecasts ``[N, H*C]``; dropout is always off here."""
    out = []
    for i in range(0, X.shape[0], batch_size):
        xb = X[i:i + batch_size]
        y, _ = forward(model, xb.reshape(xb.shape[0], -1))
        out.append(y)
    return np.concatenate(out, axis=0)


def evaluate(model: MlpModel, data: WindowSet, use_clean: bool = True) -> MetricsReport:
    """MSE / MAE over all windows, horizon steps and channels.

    Uses ``data.Y_clean`` when present and ``use_clean`` is set.
    """
    target = data.Y_clean if (use_clean and data.Y_clean is not None) else data.Y
    y_hat = predict(model, data.X)
    diff = y_hat - target.reshape(target.shape[0], -1)
    return MetricsReport(mse=float(np.mean(diff * diff)), mae=float(np.mean(np.abs(diff))),
                         horizon=int(data.Y.shape[1]))


def train(train_set: WindowSet, val_set: WindowSet, config: TrainConfig):
    """Mini-batch Adam training with early stopping on validation MSE.

    Model weights and the four scorer scalars live in separate Adam groups with
    the same learning rate. The best-validation state is restored at the end.
    Returns ``(model, scorer_params, report)``; the report's metrics are the
    best validation MSE/MAE (against clean targets when available).
    """
    t0 = time.perf_counter()
    N, L, C = train_set.X.shape
    H = train_set.Y.shape[1]
    model = MlpModel.init(L * C, config.hidden, H * C, _rng(config.seed, STREAM_INIT))
    order_rng = _rng(config.seed, STREAM_ORDER)
    drop_seed = int(_rng(config.seed, STREAM_DROPOUT).integers(0, 2 ** 63))
    scorer = config.scorer
    svec = {"scorer": scorer.learnable()}
    opt_model, opt_scorer = AdamState(), AdamState()
    adam_kw = dict(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2,
                   eps=config.adam_eps)

    best = (np.inf, model.copy(), scorer, None)
    bad_epochs = 0
    train_hist, val_hist, rate_log = [], [], []
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        perm = order_rng.permutation(N)
        total, count = 0.0, 0
        for step, start in enumerate(range(0, N, config.batch_size)):
            idx = perm[start:start + config.batch_size]
            keys = np.array([kernels.stream_key(drop_seed, epoch, step, int(i)) for i in idx],
                            dtype=np.uint64)
            res = train_step(model, train_set.X[idx], train_set.Y[idx], config, scorer, keys)
            if not np.isfinite(res.loss):
                err = DivergenceError(f"non-finite training loss at epoch {epoch}, step {step} "
                                      f"(loss={res.loss}, scorer={scorer.to_dict()})")
                err.train_loss, err.val_loss = train_hist, val_hist
                raise err
            params = model.params()
            adam_step(params, res.grads, opt_model, **adam_kw)
            if config.dropout_mode == "adaptive":
                adam_step(svec, {"scorer": res.scorer_grad}, opt_scorer, **adam_kw)
                scorer = scorer.with_learnable(svec["scorer"])
                if config.record_rates:
                    sb = res.scored
                    for j, i in enumerate(idx):
                        rate_log.append((epoch, int(i), float(sb.scores[j]),
                                         float(sb.normalized[j]), float(sb.rates[j])))
            total += res.loss * len(idx)
            count += len(idx)
        train_hist.append(total / count)
        val = evaluate(model, val_set)
        val_hist.append(val.mse)
        if not np.isfinite(val.mse):
            err = DivergenceError(f"non-finite validation loss at epoch {epoch}")
            err.train_loss, err.val_loss = train_hist, val_hist
            raise err
        if val.mse < best[0]:
            best = (val.mse, model.copy(), scorer, val)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    _, best_model, best_scorer, best_val = best
    report = best_val if best_val is not None else evaluate(best_model, val_set)
    report.train_loss = train_hist
    report.val_loss = val_hist
    report.epochs_run = epoch
    report.best_epoch = int(np.argmin(val_hist)) + 1
    report.wall_ms = (time.perf_counter() - t0) * 1e3
    report.config_hash = config.config_hash()
    report.mode = config.dropout_mode
    report.final_scorer_params = best_scorer.to_dict() if config.dropout_mode == "adaptive" else None
    report.rate_log = rate_log
    return best_model, best_scorer, report
