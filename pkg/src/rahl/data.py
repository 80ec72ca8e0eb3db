"""CSV ingestion, NaN repair, min-max scaling, windowing and the chronological split.

Pipeline order matters: split first, fit the scaler on the training part only,
then scale both parts and cut windows. :func:`prepare` enforces that order.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from rahl.errors import (
    ColumnNotFoundError,
    CsvFileNotFoundError,
    DegenerateScaleError,
    EmptyAfterCleanError,
    InvalidArgumentError,
    NoDataRowsError,
    SplitTooSmallError,
)


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    name: str = "series"
    origin: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    def __len__(self):
        return len(self.values)

    def with_values(self, values):
        return TimeSeries(values, self.name, self.origin)


@dataclass(frozen=True)
class Scaler:
    min: float
    max: float

    def __post_init__(self):
        if not (self.max > self.min):
            raise DegenerateScaleError(f"cannot scale a constant series (min={self.min}, max={self.max})")

    def scale(self, values):
        return (np.asarray(values, dtype=np.float64) - self.min) / (self.max - self.min)

    def unscale(self, values):
        return np.asarray(values, dtype=np.float64) * (self.max - self.min) + self.min

    def to_dict(self):
        return {"min": self.min, "max": self.max}


@dataclass(frozen=True)
class WindowedDataset:
    inputs: np.ndarray   # (N, w)
    targets: np.ndarray  # (N,)
    w: int
    offset: int = 0      # index in the source series of the first window's first value

    def __len__(self):
        return len(self.targets)

    def target_index(self):
        """Position of every target in the source series."""
        return self.offset + self.w + np.arange(len(self.targets))


def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return math.nan


def load_csv(path, column):
    """Read ``column`` from a headed CSV as floats; blank or unparseable cells become NaN."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise CsvFileNotFoundError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise NoDataRowsError(f"{path}: empty file (no header row)")
        header = [h.strip() for h in header]
        if column not in header:
            raise ColumnNotFoundError(column, header)
        idx = header.index(column)
        values = [_parse_float(row[idx].strip()) if idx < len(row) else math.nan for row in reader if row]
    if not values:
        raise NoDataRowsError(f"{path}: header present but no data rows")
    return TimeSeries(values, name=column, origin=str(path))


def clean(series):
    """Forward-fill NaNs from the last valid value and drop leading NaNs."""
    v = series.values
    if len(v) == 0:
        raise InvalidArgumentError("cannot clean an empty series")
    valid = ~np.isnan(v)
    if not valid.any():
        raise EmptyAfterCleanError(f"{series.name}: every value is NaN")
    first = int(np.argmax(valid))
    idx = np.where(valid, np.arange(len(v)), 0)
    np.maximum.accumulate(idx, out=idx)
    return series.with_values(v[idx][first:])


def fit_scaler(series):
    v = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    return Scaler(float(np.min(v)), float(np.max(v)))


def scale(scaler, series):
    return series.with_values(scaler.scale(series.values))


def unscale(scaler, series):
    return series.with_values(scaler.unscale(series.values))


def make_windows(series, w, offset=0):
    """Stride-1 windows of length ``w``, each targeting the value right after it."""
    v = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    if not isinstance(w, (int, np.integer)) or w < 1:
        raise InvalidArgumentError(f"window size must be a positive integer, got {w!r}")
    if len(v) < w + 1:
        raise InvalidArgumentError(f"series of length {len(v)} is too short for window {w} (need >= {w + 1})")
    inputs = np.lib.stride_tricks.sliding_window_view(v, w)[:-1].copy()
    targets = v[w:].copy()
    inputs.setflags(write=False)
    targets.setflags(write=False)
    return WindowedDataset(inputs, targets, w, offset)


def chrono_split(series, train_fraction, w=None):
    """First ``floor(fraction * len)`` values train, the rest test; no shuffling.

    With ``w`` given, both parts must hold at least ``w + 1`` values.
    """
    if not (0 < train_fraction < 1):
        raise InvalidArgumentError(f"train fraction must lie in (0, 1), got {train_fraction!r}")
    n_train = int(math.floor(train_fraction * len(series)))
    v = series.values
    train, test = series.with_values(v[:n_train]), series.with_values(v[n_train:])
    need = 1 if w is None else w + 1
    if len(train) < need or len(test) < need:
        raise SplitTooSmallError(
            f"split of {len(series)} values at {train_fraction} gives {len(train)}/{len(test)}; each side needs >= {need}"
        )
    return train, test


@dataclass(frozen=True)
class Prepared:
    """Everything a run needs from one series: scaled windows for both splits plus the scaler."""

    series: TimeSeries
    train: WindowedDataset
    test: WindowedDataset
    scaler: Scaler
    n_train: int


def prepare(series, window, train_fraction):
    """clean -> split -> fit scaler on train -> scale both -> window both."""
    cleaned = clean(series)
    train_raw, test_raw = chrono_split(cleaned, train_fraction, window)
    scaler = fit_scaler(train_raw)
    train = make_windows(scale(scaler, train_raw), window, offset=0)
    test = make_windows(scale(scaler, test_raw), window, offset=len(train_raw))
    return Prepared(cleaned, train, test, scaler, len(train_raw))
