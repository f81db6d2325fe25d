"""Time-series containers, CSV ingestion, windowing and chronological splits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataFormatError, EmptyInputError, InsufficientDataError, SplitError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """A ``[T, C]`` float64 matrix with channel names and an explicit missing mask.

    Missing entries hold 0.0 in ``values`` and ``True`` in ``missing``; no
    sentinel numbers are ever stored.
    """

    values: np.ndarray
    channel_names: tuple[str, ...] = ()
    missing: np.ndarray | None = None
    dt: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataFormatError(f"expected a 2-D [T, C] matrix, got shape {values.shape}")
        T, C = values.shape
        if T < 2 or C < 1:
            raise InsufficientDataError(f"time series needs T >= 2 and C >= 1, got T={T}, C={C}")
        if self.missing is None:
            missing = np.zeros((T, C), dtype=bool)
        else:
            missing = np.array(self.missing, dtype=bool, copy=True).reshape(T, C)
        values[missing] = 0.0
        if not np.all(np.isfinite(values)):
            raise DataFormatError("non-finite values must be flagged in the missing mask")
        names = tuple(self.channel_names) or tuple(f"c{i}" for i in range(C))
        if len(names) != C:
            raise DataFormatError(f"{len(names)} channel names for {C} channels")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "missing", _frozen(missing))
        object.__setattr__(self, "channel_names", names)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def C(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.values[start:stop], self.channel_names,
                          self.missing[start:stop], self.dt)


@dataclass(frozen=True)
class TimeSeriesWindow:
    x: np.ndarray
    y: np.ndarray
    origin_index: int
    x_missing: np.ndarray | None = None
    y_missing: np.ndarray | None = None


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    scheme: str = field(default="chronological")

    def __post_init__(self):
        r = tuple(float(v) for v in self.ratios)
        if len(r) != 3 or any(v < 0 for v in r):
            raise SplitError(f"ratios must be three non-negative numbers, got {self.ratios}")
        if abs(sum(r) - 1.0) > 1e-9:
            raise SplitError(f"ratios must sum to 1, got {sum(r)!r}")
        if self.scheme != "chronological":
            raise SplitError(f"unsupported split scheme {self.scheme!r}")
        object.__setattr__(self, "ratios", r)


# -- CSV ---------------------------------------------------------------------

def load_csv(path: str | Path, has_header: bool = True) -> TimeSeries:
    """Read a comma-separated file (one row per step, one column per channel).

    Empty cells are recorded as missing. Raises ``DataFormatError`` on ragged
    rows or unparsable cells and ``EmptyInputError`` when no data rows exist.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_rows(list(csv.reader(fh)), has_header, str(path))


def loads_csv(text: str, has_header: bool = True) -> TimeSeries:
    return _parse_rows(list(csv.reader(io.StringIO(text))), has_header, "<string>")


def _parse_rows(rows: list[list[str]], has_header: bool, source: str) -> TimeSeries:
    rows = [r for r in rows if r]  # blank lines (e.g. trailing newline)
    names: tuple[str, ...] = ()
    if has_header and rows:
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
    if not rows:
        raise EmptyInputError(f"{source}: no data rows")
    width = len(names) if names else len(rows[0])
    values = np.zeros((len(rows), width))
    missing = np.zeros((len(rows), width), dtype=bool)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(f"{source}: row {i + 1} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                missing[i, j] = True
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataFormatError(f"{source}: row {i + 1}, column {j + 1}: "
                                      f"cannot parse {cell!r}") from None
            if not math.isfinite(values[i, j]):
                raise DataFormatError(f"{source}: row {i + 1}, column {j + 1}: non-finite value")
    if len(rows) < 2:
        raise InsufficientDataError(f"{source}: need at least 2 rows, got {len(rows)}")
    return TimeSeries(values, names, missing)


def format_float(v: float) -> str:
    return repr(float(v))


def dumps_csv(series: TimeSeries, header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    if header:
        writer.writerow(series.channel_names)
    for row, miss in zip(series.values, series.missing):
        writer.writerow(["" if m else format_float(v) for v, m in zip(row, miss)])
    return buf.getvalue()


def write_csv(series: TimeSeries, path: str | Path, header: bool = True) -> None:
    # repr() of a float64 round-trips exactly (shortest repr, <= 17 sig. digits)
    Path(path).write_bytes(dumps_csv(series, header).encode("utf-8"))


# -- windowing / splitting ----------------------------------------------------

def window_count(T: int, L: int, H: int, stride: int) -> int:
    if L + H > T:
        return 0
    return (T - L - H) // stride + 1


def make_windows(series: TimeSeries, L: int, H: int, stride: int = 1) -> list[TimeSeriesWindow]:
    """Cut ``(x, y)`` pairs at origins ``0, stride, 2*stride, ...``."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if L < 1 or H < 0:
        raise ValueError(f"invalid window sizes L={L}, H={H}")
    if L + H > series.T:
        raise InsufficientDataError(f"L + H = {L + H} exceeds series length {series.T}")
    out = []
    v, m = series.values, series.missing
    for origin in range(0, window_count(series.T, L, H, stride) * stride, stride):
        out.append(TimeSeriesWindow(
            x=v[origin:origin + L], y=v[origin + L:origin + L + H], origin_index=origin,
            x_missing=m[origin:origin + L], y_missing=m[origin + L:origin + L + H],
        ))
    return out


def window_arrays(values: np.ndarray, L: int, H: int, stride: int = 1):
    """Vectorised windowing: returns ``(X [N, L, C], Y [N, H, C], origins [N])``."""
    T = values.shape[0]
    n = window_count(T, L, H, stride)
    if n == 0:
        raise InsufficientDataError(f"L + H = {L + H} exceeds series length {T}")
    origins = np.arange(n) * stride
    idx = origins[:, None] + np.arange(L + H)[None, :]
    block = values[idx]
    return block[:, :L], block[:, L:], origins


def split_lengths(T: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    n_val = int(math.floor(T * ratios[1] + 1e-9))
    n_test = int(math.floor(T * ratios[2] + 1e-9))
    return T - n_val - n_test, n_val, n_test


def chrono_split(series: TimeSeries, spec: SplitSpec, min_length: int = 1):
    """Split into contiguous train/val/test segments; flooring remainder goes to train."""
    lengths = split_lengths(series.T, spec.ratios)
    for name, n, r in zip(("train", "val", "test"), lengths, spec.ratios):
        if n < max(min_length, 1):
            raise SplitError(f"{name} segment has {n} rows (ratio {r}); "
                             f"need at least {max(min_length, 1)}")
    a, b = lengths[0], lengths[0] + lengths[1]
    # A segment of length 1 cannot be a TimeSeries (T >= 2); min_length guards that.
    return series.slice(0, a), series.slice(a, b), series.slice(b, series.T)


# -- normalization ------------------------------------------------------------

@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, series: TimeSeries, per_channel: bool = True) -> "Normalizer":
        v = np.where(series.missing, np.nan, series.values)
        if per_channel:
            mean, std = np.nanmean(v, axis=0), np.nanstd(v, axis=0)
        else:
            mean = np.full(series.C, np.nanmean(v))
            std = np.full(series.C, np.nanstd(v))
        std = np.where(std > 0, std, 1.0)
        return cls(np.nan_to_num(mean), std)

    def transform(self, series: TimeSeries) -> TimeSeries:
        return TimeSeries((series.values - self.mean) / self.std, series.channel_names,
                          series.missing, series.dt)

    def transform_values(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std
