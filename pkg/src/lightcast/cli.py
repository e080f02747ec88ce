"""Command-line driver.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .exceptions import LightcastError

log = logging.getLogger("lightcast")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_required: bool = False):
    p.add_argument("--config", metavar="PATH", help="TOML or JSON run config")
    p.add_argument("--out", metavar="DIR", required=out_required, help="output directory")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--source", choices=("live", "cache", "fixture", "synthetic"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lightcast", description="Leakage-safe PM2.5/PM10 forecasting toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fetch", help="download provider history into a CSV cache")
    _common(p, out_required=True)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)

    p = sub.add_parser("preprocess", help="hourly grid + z-score anomaly filter")
    _common(p, out_required=True)
    p.add_argument("--input", metavar="CSV")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("select-features", help="correlation/MI/mRMR report on train rows")
    _common(p, out_required=True)
    p.add_argument("--input", metavar="CSV")
    p.add_argument("--target", choices=("pm2_5", "pm10"), required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--candidates", help="comma-separated candidate columns")

    p = sub.add_parser("train", help="fit one model and write its JSON document")
    _common(p, out_required=True)
    p.add_argument("--input", metavar="CSV")
    p.add_argument("--model", choices=("fbp", "np", "sarimax", "gbt"), required=True)
    p.add_argument("--target", choices=("pm2_5", "pm10"))

    p = sub.add_parser("forecast", help="forecast from a model JSON document")
    _common(p, out_required=True)
    p.add_argument("--model-file", metavar="JSON", required=True)
    p.add_argument("--input", metavar="CSV", help="future regressor rows (raw units)")
    p.add_argument("--horizon", type=int, default=168)

    p = sub.add_parser("evaluate", help="MAE/RMSE/R2 of a forecast CSV against actuals")
    _common(p)
    p.add_argument("--forecast", metavar="CSV", required=True)
    p.add_argument("--actual", metavar="CSV", required=True)
    p.add_argument("--target", help="column of the actual CSV (default: sole/'actual' column)")

    p = sub.add_parser("bench", help="full pipeline: report, models, forecasts, plots")
    _common(p)
    p.add_argument("--model", action="append", choices=("fbp", "np", "sarimax", "gbt"),
                   help="restrict to these models (repeatable)")
    p.add_argument("--target", action="append", choices=("pm2_5", "pm10"))
    return parser


def _config(args):
    from .config import load_config

    overrides = {
        "seed": args.seed,
        "out": getattr(args, "out", None),
        "data.source": args.source,
    }
    if getattr(args, "input", None) and args.command in ("train", "select-features"):
        overrides["data.source"] = "cache"
        overrides["data.path"] = args.input
    return load_config(args.config, overrides)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_input(args, cfg):
    from .bench import load_frame
    from .frame import TimeSeriesFrame

    if getattr(args, "input", None):
        return TimeSeriesFrame.from_csv(args.input)
    return load_frame(cfg)


# ----------------------------------------------------------------- commands


def cmd_fetch(args) -> int:
    from .ingest import ProviderQuery, fetch_all

    cfg = _config(args)
    d = cfg.data
    q = ProviderQuery(args.lat if args.lat is not None else d.latitude,
                      args.lon if args.lon is not None else d.longitude,
                      args.start or d.start, args.end or d.end)
    fixture = d.fixture_dir if d.source == "fixture" else None
    if d.source == "fixture" and fixture is None:
        import os

        fixture = os.environ.get("LIGHTCAST_FIXTURE_DIR")
        if not fixture:
            raise UsageError("fixture source needs data.fixture_dir or LIGHTCAST_FIXTURE_DIR")
    elif d.source not in ("live", "fixture"):
        raise UsageError("fetch supports --source live or fixture")
    frame = fetch_all(q, fixture_dir=fixture)
    path = _out(args) / "data.csv"
    frame.to_csv(path)
    print(f"wrote {len(frame)} rows x {len(frame.columns)} columns to {path}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    from .bench import prepare

    cfg = _config(args)
    frame = _load_input(args, cfg)
    threshold = args.threshold if args.threshold is not None else cfg.zscore_threshold
    prep = prepare(frame, threshold)
    out = _out(args)
    prep.frame.to_csv(out / "preprocessed.csv")
    summary = {
        "rows": len(prep.frame),
        "gaps_filled": prep.gap_log,
        "anomalies_replaced": dict(sorted(prep.replacements.items())),
        "split": prep.split.to_dict(),
        "threshold": threshold,
    }
    (out / "preprocess.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"preprocessed {len(prep.frame)} rows; replaced {sum(prep.replacements.values())} "
          f"anomalies; filled {len(prep.gap_log)} gaps")
    return EXIT_OK


def cmd_select(args) -> int:
    from .featsel import correlation_matrix, mrmr_select
    from .frame import chronological_split

    cfg = _config(args)
    frame = _load_input(args, cfg)
    split = chronological_split(frame)
    cands = (args.candidates.split(",") if args.candidates else
             [c for c in cfg.features.candidates if c in frame.columns])
    cands = [c for c in cands if c != args.target]
    k = args.k if args.k is not None else min(cfg.features.k, len(cands))
    state = mrmr_select(frame, args.target, cands, k, rows=split.train, bins=cfg.features.bins)
    train = frame.rows(split.train)
    cols = [args.target, *cands]
    report = state.to_dict()
    report["train_rows"] = [split.train.start, split.train.stop]
    report["correlation"] = {"columns": cols,
                             "matrix": correlation_matrix(train, cols).round(12).tolist()}
    path = _out(args) / f"selection_{args.target}.json"
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(f"{args.target}: selected {', '.join(state.selected)}")
    return EXIT_OK


def cmd_train(args) -> int:
    if not args.target:
        raise UsageError("train requires --target")
    from .bench import prepare, run_model, select_features, target_data

    cfg = _config(args)
    frame = _load_input(args, cfg)
    prep = prepare(frame, cfg.zscore_threshold)
    feats, _ = select_features(prep, args.target, cfg)
    td = target_data(prep, args.target, feats)
    run = run_model(args.model, td, cfg)
    path = _out(args) / f"{args.model}_{args.target}.json"
    path.write_text(json.dumps(run.document, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return EXIT_OK


def load_model_document(doc: dict):
    from .models.additive import AdditiveForecaster
    from .models.ar_additive import ARAdditiveForecaster
    from .models.gbt import GBTForecaster
    from .models.sarimax import SarimaxForecaster

    kinds = {"additive": AdditiveForecaster, "ar_additive": ARAdditiveForecaster,
             "sarimax": SarimaxForecaster, "gbt": GBTForecaster}
    kind = doc["model"].get("kind")
    if kind not in kinds:
        raise ValueError(f"unknown model kind {kind!r}")
    return kinds[kind].from_dict(doc["model"])


def forecast_from_document(doc: dict, future, horizon: int):
    """Scale the future regressors with the stored scaler and forecast ``horizon`` steps."""
    from .frame import HOUR, TimeSeriesFrame
    from .models.ar_additive import ARAdditiveForecaster
    from .models.gbt import GBTForecaster
    from .preprocessing import TrainScaler

    if horizon < 1:
        raise UsageError("--horizon must be >= 1")
    model = load_model_document(doc)
    feats = doc["features"]
    origin = int(doc["origin"])
    if feats:
        if future is None:
            raise UsageError("--input with future regressor rows is required for this model")
        rows = future.select(feats)
        keep = rows.timestamps >= origin
        rows = rows.rows(np.nonzero(keep)[0])
        if len(rows) < horizon:
            raise ValueError(f"{len(rows)} future rows available for horizon {horizon}")
        rows = rows.rows(slice(0, horizon))
        rows = TrainScaler.from_dict(doc["scaler"]).transform(rows)
    else:
        ts = origin + HOUR * np.arange(horizon, dtype=np.int64)
        rows = TimeSeriesFrame(ts, [], np.zeros((horizon, 0)))
    history = np.asarray(doc["history"], dtype=float)
    if isinstance(model, ARAdditiveForecaster):
        rh = doc.get("regressor_history")
        return rows.timestamps, model.predict(rows, history=history,
                                              regressor_history=rh if rh else None)
    if isinstance(model, GBTForecaster):
        return rows.timestamps, model.predict(rows, history=history)
    return rows.timestamps, model.predict(rows)


def cmd_forecast(args) -> int:
    from .frame import TimeSeriesFrame

    doc = json.loads(Path(args.model_file).read_text(encoding="utf-8"))
    future = TimeSeriesFrame.from_csv(args.input) if args.input else None
    ts, fc = forecast_from_document(doc, future, args.horizon)
    path = _out(args) / "forecast.csv"
    TimeSeriesFrame(ts, ["forecast"], fc.reshape(-1, 1)).to_csv(path)
    print(f"wrote {len(fc)}-step forecast to {path}")
    return EXIT_OK


def _pick(frame, preferred):
    if preferred:
        return frame.column(preferred)
    for name in ("forecast", "actual"):
        if name in frame.columns and len(frame.columns) > 1:
            return frame.column(name)
    if len(frame.columns) == 1:
        return frame.values[:, 0]
    raise UsageError(f"ambiguous columns {list(frame.columns)}; pass --target")


def cmd_evaluate(args) -> int:
    from .frame import TimeSeriesFrame
    from .metrics import score_all

    fc = TimeSeriesFrame.from_csv(args.forecast)
    act = TimeSeriesFrame.from_csv(args.actual)
    common, ia, ib = np.intersect1d(fc.timestamps, act.timestamps, return_indices=True)
    if common.size == 0:
        raise ValueError("forecast and actual CSVs share no timestamps")
    yhat = _pick(fc, "forecast" if "forecast" in fc.columns else None)[ia]
    y = _pick(act, args.target or ("actual" if "actual" in act.columns else None))[ib]
    scores = score_all(y, yhat)
    r2 = "undefined" if scores["r2"] is None else f"{scores['r2']:.6f}"
    print(f"n     {scores['n']}")
    print(f"MAE   {scores['mae']:.6f}")
    print(f"RMSE  {scores['rmse']:.6f}")
    print(f"R2    {r2}")
    if args.out:
        (_out(args) / "metrics.json").write_text(json.dumps(scores, indent=2) + "\n",
                                                 encoding="utf-8")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_benchmark
    from .config import load_config

    overrides = {"seed": args.seed, "out": args.out, "data.source": args.source,
                 "models": args.model, "targets": args.target}
    cfg = load_config(args.config, overrides)
    if not cfg.models:
        raise UsageError("bench needs at least one enabled model")
    out = Path(cfg.out)
    result = run_benchmark(cfg, out_dir=out)
    sys.stdout.write(result.report.to_text())
    print(f"artifacts in {out}")
    return EXIT_OK


COMMANDS = {
    "fetch": cmd_fetch, "preprocess": cmd_preprocess, "select-features": cmd_select,
    "train": cmd_train, "forecast": cmd_forecast, "evaluate": cmd_evaluate, "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lightcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LightcastError, ValueError, KeyError, OSError) as exc:
        print(f"lightcast: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
