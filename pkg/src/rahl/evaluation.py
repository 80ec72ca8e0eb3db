"""MAPE, cumulative error curves, the fixed-delta Huber sweep and the loss comparison."""

import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from rahl.errors import InvalidArgumentError, RahlError, UndefinedMapeError
from rahl.losses import DEFAULT_RAHL_ALPHA, LossSpec, Variant
from rahl.train import TrainRecord, predict_series, train

log = logging.getLogger(__name__)

DEFAULT_DELTAS = tuple(0.5 * k for k in range(1, 9))  # 0.5, 1.0, ..., 4.0
COMPARE_LABELS = ("RAHL", "Huber(best δ)", "MSE", "MAE")


@dataclass(frozen=True)
class EvalReport:
    mape: float
    ape_series: np.ndarray      # per-step |Y - Yhat| / |Y| * 100; 0 where Y == 0
    cumulative_ape: np.ndarray  # running sum of ape_series
    skipped_zero_targets: int

    def to_dict(self):
        return {
            "mape": self.mape,
            "skipped_zero_targets": self.skipped_zero_targets,
            "ape_series": [float(v) for v in self.ape_series],
            "cumulative_ape": [float(v) for v in self.cumulative_ape],
        }


def mape(targets, preds):
    """Mean absolute percentage error in percent; zero targets are excluded and counted."""
    y = np.asarray(targets, dtype=np.float64)
    p = np.asarray(preds, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1:
        raise InvalidArgumentError(f"targets and preds must be 1-d of equal length, got {y.shape} and {p.shape}")
    if y.size == 0:
        raise InvalidArgumentError("cannot compute MAPE of empty vectors")
    keep = y != 0
    if not keep.any():
        raise UndefinedMapeError("MAPE is undefined: every target is zero")
    ape = np.zeros_like(y)
    ape[keep] = np.abs((y[keep] - p[keep]) / y[keep]) * 100.0
    return EvalReport(
        mape=float(ape[keep].mean()),
        ape_series=ape,
        cumulative_ape=np.cumsum(ape),
        skipped_zero_targets=int((~keep).sum()),
    )


@dataclass
class RunResult:
    """One trained model evaluated on the test split."""

    config: object
    record: TrainRecord
    preds: np.ndarray
    targets: np.ndarray
    t: np.ndarray
    report: EvalReport


def run_experiment(config, prepared):
    record = train(config, prepared.train)
    preds, targets = predict_series(record.params, prepared.scaler, prepared.test)
    return RunResult(config, record, preds, targets, prepared.test.target_index(), mape(targets, preds))


@dataclass
class Row:
    label: str
    mape: Optional[float]
    delta: Optional[float] = None
    per_seed: list = field(default_factory=list)
    failed: bool = False
    error: Optional[str] = None

    def to_dict(self):
        return {
            "label": self.label,
            "mape": self.mape,
            "delta": self.delta,
            "per_seed_mape": self.per_seed,
            "failed": self.failed,
            "error": self.error,
        }


@dataclass
class SweepReport:
    kind: str
    rows: list
    best_label: Optional[str]
    seeds: list = field(default_factory=list)
    sweep: Optional["SweepReport"] = None
    runs: dict = field(default_factory=dict, repr=False)  # label -> [RunResult per seed]; not serialised

    def row(self, label):
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    @property
    def all_failed(self):
        return all(r.failed for r in self.rows)

    @property
    def any_failed(self):
        return any(r.failed for r in self.rows)

    def to_dict(self):
        d = {
            "schema_version": 1,
            "kind": self.kind,
            "seeds": list(self.seeds),
            "rows": [r.to_dict() for r in self.rows],
            "best_label": self.best_label,
        }
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        return d

    def to_text(self):
        title = "Huber delta sweep (test MAPE %)" if self.kind == "delta_sweep" else "Loss comparison (test MAPE %)"
        width = max(len("label"), *(len(r.label) for r in self.rows))
        lines = [title, f"{'label':<{width}}  {'MAPE':>10}"]
        lines.append("-" * (width + 12))
        for r in self.rows:
            value = "FAILED" if r.failed else f"{r.mape:10.4f}"
            mark = "  *" if r.label == self.best_label else ""
            lines.append(f"{r.label:<{width}}  {value:>10}{mark}")
        if len(self.seeds) > 1:
            lines.append(f"(median over seeds {', '.join(map(str, self.seeds))})")
        return "\n".join(lines) + "\n"


def best_label(rows):
    """Argmin MAPE over non-failed rows; ties go to the smaller delta, then the label."""
    ok = [r for r in rows if not r.failed]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.mape, math.inf if r.delta is None else r.delta, r.label)).label


def _median(values):
    return float(statistics.median(values))


def _run_row(label, config, prepared, seeds, delta=None):
    runs, per_seed = [], []
    try:
        for seed in seeds:
            result = run_experiment(replace(config, seed=seed), prepared)
            runs.append(result)
            per_seed.append(result.report.mape)
    except RahlError as exc:
        log.warning("row %s failed: %s", label, exc)
        return Row(label, None, delta=delta, per_seed=per_seed, failed=True, error=str(exc)), runs
    return Row(label, _median(per_seed), delta=delta, per_seed=per_seed), runs


def _run_rows(jobs, prepared, seeds, workers):
    """``jobs`` is a list of (label, config, delta). Result order follows ``jobs``."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_row, label, cfg, prepared, seeds, delta) for label, cfg, delta in jobs]
            return [f.result() for f in futures]
    return [_run_row(label, cfg, prepared, seeds, delta) for label, cfg, delta in jobs]


def _seeds(template, seeds):
    return list(seeds) if seeds is not None else [template.seed]


def delta_sweep(template, prepared, deltas=DEFAULT_DELTAS, seeds=None, workers=1):
    """Fixed-delta Huber for every delta in ``deltas`` on identical data and seeds."""
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise InvalidArgumentError("need at least one delta")
    for d in deltas:
        if not (math.isfinite(d) and d > 0):
            raise InvalidArgumentError(f"deltas must be positive, got {d!r}")
    seeds = _seeds(template, seeds)
    jobs = [(f"{d:g}", replace(template, loss=LossSpec.huber(d)), d) for d in deltas]
    results = _run_rows(jobs, prepared, seeds, workers)
    rows = [row for row, _ in results]
    runs = {row.label: r for row, r in results}
    return SweepReport("delta_sweep", rows, best_label(rows), seeds=seeds, runs=runs)


def compare_losses(template, prepared, alpha=DEFAULT_RAHL_ALPHA, deltas=DEFAULT_DELTAS, seeds=None, workers=1):
    """RAHL vs. best-delta Huber vs. MSE vs. MAE on identical data and seeds.

    The RAHL row starts from ``alpha`` unless ``template.loss`` is already a RAHL spec.
    """
    seeds = _seeds(template, seeds)
    sweep = delta_sweep(template, prepared, deltas, seeds, workers)
    rahl_spec = template.loss if template.loss.variant is Variant.RAHL else LossSpec.rahl(alpha)
    jobs = [
        ("RAHL", replace(template, loss=rahl_spec), None),
        ("MSE", replace(template, loss=LossSpec.mse()), None),
        ("MAE", replace(template, loss=LossSpec.mae()), None),
    ]
    (rahl_row, rahl_runs), (mse_row, mse_runs), (mae_row, mae_runs) = _run_rows(jobs, prepared, seeds, workers)

    if sweep.best_label is None:
        huber_row = Row(COMPARE_LABELS[1], None, failed=True, error="every delta in the sweep failed")
        huber_runs = []
    else:
        best = sweep.row(sweep.best_label)
        huber_row = Row(COMPARE_LABELS[1], best.mape, delta=best.delta, per_seed=list(best.per_seed))
        huber_runs = sweep.runs[sweep.best_label]
    rows = [rahl_row, huber_row, mse_row, mae_row]
    # the Huber row's delta is informational; do not let it steer the tie-break here
    pick = best_label([replace(r, delta=None) for r in rows])
    runs = {"RAHL": rahl_runs, COMPARE_LABELS[1]: huber_runs, "MSE": mse_runs, "MAE": mae_runs}
    return SweepReport("compare", rows, pick, seeds=seeds, sweep=sweep, runs=runs)
