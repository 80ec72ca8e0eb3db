"""Command-line entry point: ``rahl {synth,train,sweep,compare,predict,rerun}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 training
divergence, 4 sweep/compare where every row failed.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import traceback

import numpy as np

from rahl import __version__, checkpoint, svg
from rahl.data import load_csv, make_windows, prepare, chrono_split, clean
from rahl.errors import InvalidArgumentError, RahlError
from rahl.evaluation import (
    COMPARE_LABELS,
    DEFAULT_DELTAS,
    DEFAULT_RAHL_ALPHA,
    compare_losses,
    delta_sweep,
    mape,
    run_experiment,
)
from rahl.losses import LossSpec
from rahl.synth import SynthConfig, generate, write_csv
from rahl.train import TrainConfig, predict_series

log = logging.getLogger("rahl")

MANIFEST = "manifest.json"
METRICS = "metrics.json"
CHECKPOINT = "model.ckpt"
PREDICTIONS = "predictions.csv"
REPORT = "report.txt"
OVERLAY_FILES = {
    "RAHL": "overlay_rahl.svg",
    "Huber(best δ)": "overlay_huber.svg",
    "MSE": "overlay_mse.svg",
    "MAE": "overlay_mae.svg",
}
CUMULATIVE_FILE = "cumulative_ape.svg"
DEFAULT_LOSS = f"rahl:{DEFAULT_RAHL_ALPHA:g}"

# flags that make up the run configuration, in manifest order
_TRAIN_FLAGS = ("input", "column", "epochs", "batch", "window", "lr", "seed", "train_fraction", "hidden", "fc_hidden")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _loss_arg(text):
    try:
        return LossSpec.parse(text)
    except InvalidArgumentError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _deltas_arg(text):
    try:
        deltas = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}") from None
    if not deltas or any(not (d > 0 and np.isfinite(d)) for d in deltas):
        raise argparse.ArgumentTypeError("deltas must be a comma-separated list of positive numbers")
    return deltas


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_training_flags(p):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--column", default="CQI", help="numeric column to forecast (default: CQI)")
    p.add_argument("--epochs", type=_positive_int, default=300)
    p.add_argument("--batch", type=_positive_int, default=24, help="mini-batch size")
    p.add_argument("--window", type=_positive_int, default=36, help="sliding window length")
    p.add_argument("--lr", type=float, default=0.01, help="Adam learning rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8, help="chronological train share")
    p.add_argument("--hidden", type=_positive_int, default=64, help="LSTM hidden units")
    p.add_argument("--fc-hidden", type=_positive_int, default=64, help="fully-connected layer units")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--dry-run", action="store_true", help="write the manifest and stop")


def build_parser():
    parser = _Parser(prog="rahl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rahl {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic CQI trace")
    p.add_argument("--length", type=_positive_int, default=SynthConfig.length)
    p.add_argument("--seed", type=int, default=SynthConfig.seed)
    p.add_argument("--base-level", type=float, default=SynthConfig.base_level)
    p.add_argument("--smoothness", type=float, default=SynthConfig.smoothness)
    p.add_argument("--noise-sd", type=float, default=SynthConfig.noise_sd)
    p.add_argument("--outlier-rate", type=float, default=SynthConfig.outlier_rate)
    p.add_argument("--outlier-magnitude", type=float, default=SynthConfig.outlier_magnitude)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model and evaluate it on the test split")
    _add_training_flags(p)
    p.add_argument("--loss", type=_loss_arg, default=LossSpec.parse(DEFAULT_LOSS),
                   help="mse | mae | huber:<delta> | rahl:<alpha> (default: " + DEFAULT_LOSS + ")")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="fixed-delta Huber sweep")
    _add_training_flags(p)
    p.add_argument("--deltas", type=_deltas_arg, default=list(DEFAULT_DELTAS))
    p.add_argument("--seeds", type=_positive_int, default=1, help="train seeds seed..seed+N-1, report the median")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads for independent rows")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="RAHL vs best-delta Huber vs MSE vs MAE, with plots")
    _add_training_flags(p)
    p.add_argument("--alpha", type=float, default=DEFAULT_RAHL_ALPHA, help="RAHL initial delta")
    p.add_argument("--deltas", type=_deltas_arg, default=list(DEFAULT_DELTAS))
    p.add_argument("--seeds", type=_positive_int, default=1, help="train seeds seed..seed+N-1, report the median")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads for independent rows")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", help="predict with a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--column", default=None, help="defaults to the column used for training")
    p.add_argument("--slice", choices=("all", "train", "test"), default="all")
    p.add_argument("-o", "--output", default=PREDICTIONS)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("rerun", help="re-run a train/sweep/compare command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory for the re-run")
    p.set_defaults(func=cmd_rerun)
    return parser


# ---------------------------------------------------------------- helpers


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _config_from(args, loss):
    if not (0 < args.train_fraction < 1):
        raise InvalidArgumentError(f"--train-fraction must lie in (0, 1), got {args.train_fraction}")
    if args.seed < 0:
        raise InvalidArgumentError(f"--seed must be non-negative, got {args.seed}")
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        window=args.window,
        lr=args.lr,
        seed=args.seed,
        loss=loss,
        train_fraction=args.train_fraction,
        hidden_size=args.hidden,
        fc_hidden=args.fc_hidden,
    )


def _effective_args(args, extra):
    d = {k: getattr(args, k) for k in _TRAIN_FLAGS}
    d.update(extra)
    return d


def _argv_from(command, flags, out):
    argv = [command]
    for key, value in flags.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, list):
            value = ",".join(repr(float(v)) for v in value)
        argv += [flag, str(value)]
    return argv + ["--out", out]


def _start_run(command, args, config, prepared, extra_flags, outputs):
    """Create the output directory and write the manifest (before any training)."""
    os.makedirs(args.out, exist_ok=True)
    flags = _effective_args(args, extra_flags)
    manifest = {
        "schema_version": 1,
        "tool": "rahl",
        "tool_version": __version__,
        "command": command,
        "flags": flags,
        "argv": _argv_from(command, flags, args.out),
        "config": config.to_dict(),
        "seed": config.seed,
        "input": {"path": os.path.abspath(args.input), "sha256": _sha256(args.input), "column": args.column},
        "split": {
            "method": "chronological",
            "train_fraction": config.train_fraction,
            "n_train": prepared.n_train,
            "n_test": len(prepared.series) - prepared.n_train,
        },
        "scaler": prepared.scaler.to_dict(),
        "optimizer": {"name": "adam", "lr": config.lr, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
        "outputs": outputs,
    }
    _write_json(os.path.join(args.out, MANIFEST), manifest)
    return manifest


def _load_prepared(args):
    series = load_csv(args.input, args.column)
    return prepare(series, args.window, args.train_fraction)


def _write_predictions(path, t, actual, predicted):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "actual", "predicted"])
        for row in zip(t, actual, predicted):
            w.writerow([int(row[0]), repr(float(row[1])), repr(float(row[2]))])


def _floats(values):
    return [float(v) for v in values]


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    cfg = SynthConfig(
        length=args.length,
        seed=args.seed,
        base_level=args.base_level,
        smoothness=args.smoothness,
        noise_sd=args.noise_sd,
        outlier_rate=args.outlier_rate,
        outlier_magnitude=args.outlier_magnitude,
    )
    write_csv(generate(cfg), args.output)
    return 0


def train_metrics(config, result):
    record, report = result.record, result.report
    return {
        "schema_version": 1,
        "loss": config.loss.label(),
        "loss_spec": config.loss.to_dict(),
        "config": config.to_dict(),
        "epochs": config.epochs,
        "mape": report.mape,
        "skipped_zero_targets": report.skipped_zero_targets,
        "n_test": len(result.targets),
        "train_loss": _floats(record.train_loss),
        "delta_trajectory": _floats(record.delta) if config.loss.is_rahl else None,
        "final_delta": record.final_delta,
        "final_beta": record.beta if config.loss.is_rahl else None,
        "cumulative_ape": _floats(report.cumulative_ape),
    }


def cmd_train(args):
    config = _config_from(args, args.loss)
    prepared = _load_prepared(args)
    outputs = {"manifest": MANIFEST, "checkpoint": CHECKPOINT, "metrics": METRICS, "predictions": PREDICTIONS}
    _start_run("train", args, config, prepared, {"loss": config.loss.label()}, outputs)
    if args.dry_run:
        return 0
    result = run_experiment(config, prepared)
    rec = result.record
    checkpoint.save(
        os.path.join(args.out, CHECKPOINT), rec.params, config, prepared.scaler, rec.adam, rec.beta,
        extra={"column": args.column, "input_sha256": _sha256(args.input)},
    )
    _write_json(os.path.join(args.out, METRICS), train_metrics(config, result))
    _write_predictions(os.path.join(args.out, PREDICTIONS), result.t, result.targets, result.preds)
    log.info("test MAPE %.4f%% (%.1fs)", result.report.mape, rec.seconds)
    return 0


def _seed_list(args):
    return list(range(args.seed, args.seed + args.seeds))


def _finish_report(args, report):
    data = report.to_dict()
    _write_json(os.path.join(args.out, METRICS), data)
    with open(os.path.join(args.out, REPORT), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    sys.stdout.write(report.to_text())
    if report.all_failed:
        return 4
    if report.any_failed:
        log.warning("some rows failed; see %s", os.path.join(args.out, METRICS))
    return 0


def cmd_sweep(args):
    config = _config_from(args, LossSpec.huber(args.deltas[0]))
    prepared = _load_prepared(args)
    outputs = {"manifest": MANIFEST, "metrics": METRICS, "report": REPORT}
    _start_run("sweep", args, config, prepared, {"deltas": args.deltas, "seeds": args.seeds, "jobs": args.jobs}, outputs)
    if args.dry_run:
        return 0
    report = delta_sweep(config, prepared, args.deltas, seeds=_seed_list(args), workers=args.jobs)
    return _finish_report(args, report)


def cmd_compare(args):
    if not (args.alpha > 0 and np.isfinite(args.alpha)):
        raise InvalidArgumentError(f"--alpha must be positive, got {args.alpha}")
    config = _config_from(args, LossSpec.rahl(args.alpha))
    prepared = _load_prepared(args)
    outputs = {"manifest": MANIFEST, "metrics": METRICS, "report": REPORT,
               "plots": list(OVERLAY_FILES.values()) + [CUMULATIVE_FILE]}
    extra = {"alpha": args.alpha, "deltas": args.deltas, "seeds": args.seeds, "jobs": args.jobs}
    _start_run("compare", args, config, prepared, extra, outputs)
    if args.dry_run:
        return 0
    report = compare_losses(config, prepared, alpha=args.alpha, deltas=args.deltas,
                            seeds=_seed_list(args), workers=args.jobs)
    data = report.to_dict()
    curves = []
    for row in data["rows"]:
        runs = report.runs.get(row["label"]) or []
        row["cumulative_ape"] = _floats(runs[0].report.cumulative_ape) if runs else None
        row["delta_trajectories"] = (
            [_floats(r.record.delta) for r in runs] if row["label"] == "RAHL" else None
        )
        if runs:
            first = runs[0]
            name = row["label"]
            chart = svg.line_chart(
                [("actual", first.t, first.targets), ("predicted", first.t, first.preds)],
                title=f"{name}: test MAPE {first.report.mape:.2f}%",
                y_label=args.column,
            )
            svg.write(os.path.join(args.out, OVERLAY_FILES[name]), chart)
            curves.append((name, first.t, first.report.cumulative_ape))
    svg.write(
        os.path.join(args.out, CUMULATIVE_FILE),
        svg.line_chart(curves, title="Cumulative absolute percentage error", y_label="cumulative APE (%)"),
    )
    _write_json(os.path.join(args.out, METRICS), data)
    with open(os.path.join(args.out, REPORT), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    sys.stdout.write(report.to_text())
    return 4 if report.all_failed else 0


def cmd_predict(args):
    ck = checkpoint.load(args.checkpoint)
    column = args.column or ck.extra.get("column", "CQI")
    series = clean(load_csv(args.input, column))
    w = ck.config.window
    if args.slice == "all":
        part, offset = series, 0
    else:
        train_part, test_part = chrono_split(series, ck.config.train_fraction, w)
        part, offset = (train_part, 0) if args.slice == "train" else (test_part, len(train_part))
    # scaler comes from the training run, never refit here
    ds = make_windows(part.with_values(ck.scaler.scale(part.values)), w, offset=offset)
    preds, targets = predict_series(ck.params, ck.scaler, ds)
    _write_predictions(args.output, ds.target_index(), targets, preds)
    report = mape(targets, preds)
    print(json.dumps({"mape": report.mape, "n": len(targets), "skipped_zero_targets": report.skipped_zero_targets}))
    return 0


def cmd_rerun(args):
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("command") not in ("train", "sweep", "compare"):
        raise InvalidArgumentError(f"manifest command {manifest.get('command')!r} cannot be re-run")
    path = manifest["input"]["path"]
    if not os.path.exists(path):
        raise InvalidArgumentError(f"input file recorded in manifest is missing: {path}")
    if _sha256(path) != manifest["input"]["sha256"]:
        raise InvalidArgumentError(f"input file {path} changed since the manifest was written (sha256 mismatch)")
    argv = list(manifest["argv"])
    argv[argv.index("--out") + 1] = args.out
    return main(argv)


def _origin(exc):
    """Module of the innermost rahl frame that raised ``exc``."""
    name = "rahl"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("rahl"):
            name = mod
    return name


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RahlError as exc:
        print(f"rahl {args.command}: {_origin(exc)}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
