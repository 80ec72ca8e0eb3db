"""Seeded CQI-like traces: an AR(1) level around ``base_level`` plus sparse impulses.

Spikes are added to the observation, not to the AR state, so a spike lasts one
step and the level it sits on is undisturbed. Output is clamped to [0, 15] and
rounded to integers (round-half-to-even).

Random source: numpy ``Generator(PCG64(seed))``. Draw order is fixed: all
Gaussian innovations (``length - 1``), then the impulse uniforms (``length``),
then the impulse signs (``length``).
"""

import csv
from dataclasses import dataclass

import numpy as np

from rahl.data import TimeSeries
from rahl.errors import InvalidArgumentError

CQI_MIN, CQI_MAX = 0, 15


@dataclass(frozen=True)
class SynthConfig:
    length: int = 4000
    seed: int = 0
    base_level: float = 10.0
    smoothness: float = 0.9
    noise_sd: float = 0.8
    outlier_rate: float = 0.05
    outlier_magnitude: float = 6.0

    def __post_init__(self):
        if not isinstance(self.length, (int, np.integer)) or self.length < 1:
            raise InvalidArgumentError(f"length must be a positive integer, got {self.length!r}")
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {self.seed!r}")
        if not (CQI_MIN <= self.base_level <= CQI_MAX):
            raise InvalidArgumentError(f"base_level must lie in [0, 15], got {self.base_level!r}")
        if not (0 < self.smoothness < 1):
            raise InvalidArgumentError(f"smoothness must lie in (0, 1), got {self.smoothness!r}")
        if not (self.noise_sd >= 0):
            raise InvalidArgumentError(f"noise_sd must be >= 0, got {self.noise_sd!r}")
        if not (0 <= self.outlier_rate < 1):
            raise InvalidArgumentError(f"outlier_rate must lie in [0, 1), got {self.outlier_rate!r}")
        if not (self.outlier_magnitude > 0):
            raise InvalidArgumentError(f"outlier_magnitude must be positive, got {self.outlier_magnitude!r}")


@dataclass(frozen=True)
class SynthTrace:
    series: TimeSeries
    impulses: np.ndarray  # +1 / -1 where a spike was injected, 0 elsewhere

    @property
    def impulse_count(self):
        return int(np.count_nonzero(self.impulses))


def simulate(cfg):
    rng = np.random.default_rng(cfg.seed)
    n = cfg.length
    noise = rng.normal(0.0, 1.0, size=n - 1) * cfg.noise_sd
    hit = rng.random(n) < cfg.outlier_rate
    sign = np.where(rng.random(n) < 0.5, -1, 1)
    level = np.empty(n)
    level[0] = cfg.base_level
    s, pull = cfg.smoothness, (1.0 - cfg.smoothness) * cfg.base_level
    for t in range(1, n):
        level[t] = s * level[t - 1] + pull + noise[t - 1]
    impulses = np.where(hit, sign, 0)
    observed = np.rint(np.clip(level + impulses * cfg.outlier_magnitude, CQI_MIN, CQI_MAX))
    return SynthTrace(TimeSeries(observed, name="CQI", origin="synthetic"), impulses)


def generate(cfg):
    """Synthetic trace as a :class:`TimeSeries` (see module docstring for the model)."""
    return simulate(cfg).series


def write_csv(series, path):
    """Write ``t,CQI`` rows; values are integral so they are written without decimals."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "CQI"])
        for t, v in enumerate(series.values):
            w.writerow([t, int(v)])
