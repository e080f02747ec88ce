"""End-to-end benchmark: load -> grid -> split -> z-score filter -> feature
selection -> train-only scaling -> fit -> 168 h forecast -> metrics.

Leakage rules enforced here:

* split indices depend only on the row count;
* z-score statistics, feature selection and scaler statistics come from
  the train rows, and anomaly replacement runs on each split separately;
* models see train/val views only. For the test window they receive the
  forecast-origin history tail and the test-window regressors (observed
  covariates), never the test targets.

Train and validation metrics are one-step-ahead for models with lagged
inputs; test metrics come from recursive forecasts over the whole window.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synthetic
from .config import RunConfig
from .exceptions import StageError
from .featsel import mrmr_select
from .frame import (SplitIndices, TimeSeriesFrame, chronological_split, enforce_hourly_grid,
                    format_timestamp, zscore_filter)
from .metrics import score_all
from .models.additive import AdditiveForecaster
from .models.ar_additive import ARAdditiveForecaster
from .models.gbt import GBTForecaster
from .models.sarimax import SarimaxForecaster
from .preprocessing import TrainScaler

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
MODEL_ORDER = ("fbp", "np", "lstm", "sarimax", "gbt")
MODEL_LABELS = {
    "fbp": "FB Prophet (additive)",
    "np": "NeuralProphet (AR-additive)",
    "lstm": "LSTM",
    "sarimax": "SARIMAX",
    "gbt": "LightGBM (hist GBT)",
    "persistence": "Persistence",
}
SPLITS = ("train", "val", "test")


# ------------------------------------------------------------------ report


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    persistence: list = field(default_factory=list)
    relative_rmse: dict = field(default_factory=dict)
    generated_at: str = ""
    config_digest: str = ""
    meta: dict = field(default_factory=dict)

    def add(self, model: str, target: str, split: str, scores: dict | None):
        if scores is None:
            return
        self.rows.append({"model": model, "target": target, "split": split, **scores})

    def get(self, model: str, target: str, split: str) -> dict | None:
        for r in self.rows + self.persistence:
            if (r["model"], r["target"], r["split"]) == (model, target, split):
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "generated_at": self.generated_at,
            "config_digest": self.config_digest,
            "meta": self.meta,
            "rows": self.rows,
            "persistence": self.persistence,
            "relative_test_rmse": self.relative_rmse,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        """Aligned table in the model order FBP, NP, LSTM (skipped), SARIMAX, GBT."""
        def f(r, key):
            if r is None or r.get(key) is None:
                return "--"
            return f"{r[key]:.2f}"

        header = ("Model", "Target", "Train MAE", "Train RMSE", "Val MAE", "Val RMSE",
                  "Test MAE", "Test RMSE", "Test R2")
        lines = []
        targets = self.meta.get("targets", [])
        models = [m for m in MODEL_ORDER if m == "lstm" or
                  any(r["model"] == m for r in self.rows)] + ["persistence"]
        for m in models:
            for i, t in enumerate(targets):
                label = MODEL_LABELS[m] if i == 0 else ""
                if m == "lstm":
                    lines.append((label, t, *(["skipped"] + ["--"] * 6)))
                    continue
                tr, va, te = (self.get(m, t, s) for s in SPLITS)
                lines.append((label, t, f(tr, "mae"), f(tr, "rmse"), f(va, "mae"),
                              f(va, "rmse"), f(te, "mae"), f(te, "rmse"), f(te, "r2")))
        widths = [max(len(str(row[i])) for row in [header, *lines]) for i in range(len(header))]
        fmt = "  ".join(f"{{:<{w}}}" if i < 2 else f"{{:>{w}}}" for i, w in enumerate(widths))
        out = [fmt.format(*header), "-" * (sum(widths) + 2 * (len(widths) - 1))]
        out += [fmt.format(*row) for row in lines]
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------- pipeline


@dataclass
class Prepared:
    frame: TimeSeriesFrame
    split: SplitIndices
    gap_log: list
    replacements: dict


@dataclass
class TargetData:
    target: str
    features: list
    scaler: TrainScaler | None
    scaled: TimeSeriesFrame
    split: SplitIndices

    def view(self, name: str) -> TimeSeriesFrame:
        return self.scaled.rows(getattr(self.split, name))

    def y(self, name: str) -> np.ndarray:
        return self.view(name)[self.target]

    def test_exog(self) -> TimeSeriesFrame:
        """Test-window regressors with the target column removed."""
        return self.view("test").select(self.features)


@dataclass
class ModelRun:
    model_name: str
    target: str
    model: object
    predictions: dict
    document: dict


def load_frame(cfg: RunConfig) -> TimeSeriesFrame:
    src = cfg.data.source
    if src == "synthetic":
        return synthetic.generate(cfg.data.hours, seed=cfg.seed)
    if src == "cache":
        if not cfg.data.path:
            raise ValueError("data.path is required for the cache source")
        return TimeSeriesFrame.from_csv(cfg.data.path)
    from .ingest import ProviderQuery, fetch_all

    q = ProviderQuery(cfg.data.latitude, cfg.data.longitude, cfg.data.start, cfg.data.end)
    if src == "fixture":
        import os

        fixture_dir = cfg.data.fixture_dir or os.environ.get("LIGHTCAST_FIXTURE_DIR")
        if not fixture_dir:
            raise ValueError("fixture source needs data.fixture_dir or LIGHTCAST_FIXTURE_DIR")
        return fetch_all(q, fixture_dir=fixture_dir)
    return fetch_all(q)


def prepare(frame: TimeSeriesFrame, threshold: float) -> Prepared:
    grid = enforce_hourly_grid(frame)
    frame = grid.frame
    split = chronological_split(frame)
    train = frame.rows(split.train)
    stats = {c: (float(np.mean(train[c])), float(np.std(train[c], ddof=1))) for c in frame.columns}
    parts, replaced = [], {}
    for name in SPLITS:
        res = zscore_filter(frame.rows(getattr(split, name)), threshold, stats=stats)
        parts.append(res.frame.values)
        for c, k in res.replaced.items():
            replaced[c] = replaced.get(c, 0) + k
    filtered = frame.with_values(np.vstack(parts))
    return Prepared(filtered, split, grid.gap_log, replaced)


def select_features(prep: Prepared, target: str, cfg: RunConfig) -> tuple:
    fc = cfg.features
    if fc.mode == "fixed":
        feats = list(fc.fixed.get(target, []))
        return feats, None
    candidates = [c for c in fc.candidates if c != target and c in prep.frame.columns]
    k = min(fc.k, len(candidates))
    state = mrmr_select(prep.frame, target, candidates, k, rows=prep.split.train, bins=fc.bins)
    return list(state.selected), state


def target_data(prep: Prepared, target: str, features: list) -> TargetData:
    sub = prep.frame.select([target, *features])
    scaler = None
    if features:
        scaler = TrainScaler(columns=tuple(features), train=prep.split.train).fit(sub)
        sub = scaler.transform(sub)
    return TargetData(target, list(features), scaler, sub, prep.split)


def _tail(td: TargetData, n: int) -> np.ndarray:
    """Last ``n`` observed targets before the test window (train + val)."""
    y = np.concatenate([td.y("train"), td.y("val")])
    return y[-n:]


def run_model(name: str, td: TargetData, cfg: RunConfig) -> ModelRun:
    feats = tuple(td.features)
    Xtr, ytr = td.view("train"), td.y("train")
    Xva, yva = td.view("val"), td.y("val")
    Xte = td.test_exog()
    preds = {}
    extra = {}
    if name == "fbp":
        model = AdditiveForecaster.from_config(cfg.fbp_config(feats))
        if cfg.fbp_val_free:
            both = td.scaled.rows(slice(td.split.train.start, td.split.val.stop))
            model.fit(both, both[td.target])
            preds["train"] = (ytr, model.predict(Xtr))
        else:
            model.fit(Xtr, ytr)
            preds["train"] = (ytr, model.predict(Xtr))
            preds["val"] = (yva, model.predict(Xva))
        preds["test"] = model.predict(Xte)
    elif name == "np":
        model = ARAdditiveForecaster.from_config(cfg.np_config(feats))
        model.fit(Xtr, ytr)
        p, q = model.n_lags, model.regressor_lags
        k = max(p, q)
        R = np.vstack([Xtr.select(feats).values, Xva.select(feats).values])
        preds["train"] = (ytr[k:], model.predict_one_step(
            Xtr.rows(slice(k, None)), ytr[k:], history=ytr[k - p:k],
            regressor_history=R[k - q:k] if q else None))
        preds["val"] = (yva, model.predict_one_step(
            Xva, yva, history=ytr[-p:],
            regressor_history=R[len(ytr) - q:len(ytr)] if q else None))
        preds["test"] = model.predict(Xte, history=_tail(td, p),
                                      regressor_history=R[len(R) - q:] if q else None)
        if q:
            extra["regressor_history"] = R[len(R) - q:].tolist()
    elif name == "sarimax":
        order = cfg.sarimax_order()
        model = SarimaxForecaster(order=(order.p, order.d, order.q),
                                  seasonal_order=(order.P, order.D, order.Q, order.s),
                                  exog=feats)
        model.fit(Xtr, ytr)
        s = order.s
        preds["train"] = (ytr[s + 1:], model.fitted_[s + 1:])
        preds["val"] = (yva, model.update(Xva, yva))
        preds["test"] = model.predict(Xte)
    elif name == "gbt":
        g = cfg.gbt_config()
        model = GBTForecaster.from_config(g, regressors=feats)
        model.fit(Xtr, ytr, eval_frame=Xva, eval_y=yva)
        L = model.n_lags
        preds["train"] = (ytr[L:], model.predict_one_step(Xtr.rows(slice(L, None)), ytr[L:],
                                                          history=ytr[:L]))
        preds["val"] = (yva, model.predict_one_step(Xva, yva, history=ytr[-L:]))
        preds["test"] = model.predict(Xte, history=_tail(td, L))
    else:
        raise ValueError(f"unknown model {name!r}")
    doc = {
        "target": td.target,
        "features": list(td.features),
        "scaler": td.scaler.to_dict() if td.scaler is not None else None,
        "origin": int(td.scaled.timestamps[td.split.test.start]),
        "history": _tail(td, 168).tolist(),
        "model": model.to_dict(),
        **extra,
    }
    return ModelRun(name, td.target, model, preds, doc)


def persistence(td: TargetData) -> dict:
    ytr, yva = td.y("train"), td.y("val")
    return {
        "train": (ytr[1:], ytr[:-1]),
        "val": (yva, np.concatenate([ytr[-1:], yva[:-1]])),
        "test": np.full(len(td.split.test), yva[-1]),
    }


@dataclass
class BenchResult:
    report: MetricsReport
    runs: list
    forecasts: dict
    prepared: Prepared
    targets: dict


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_benchmark(cfg: RunConfig, frame: TimeSeriesFrame | None = None,
                  out_dir: str | Path | None = None) -> BenchResult:
    """Execute the full pipeline and (when ``out_dir`` is set) write artifacts."""
    if not cfg.models:
        raise ValueError("no models enabled")
    raw = frame if frame is not None else _stage("load", load_frame, cfg)
    prep = _stage("preprocess", prepare, raw, cfg.zscore_threshold)
    split = prep.split
    targets = {}
    selections = {}
    for t in cfg.targets:
        feats, state = _stage("select-features", select_features, prep, t, cfg)
        targets[t] = _stage("scale", target_data, prep, t, feats)
        selections[t] = state.to_dict() if state is not None else {"selected": feats}

    tasks = [(m, t) for m in MODEL_ORDER if m in cfg.models for t in cfg.targets]

    def work(task):
        m, t = task
        return _stage(f"fit:{m}:{t}", run_model, m, targets[t], cfg)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            runs = list(pool.map(work, tasks))
    else:
        runs = [work(task) for task in tasks]

    test_ts = prep.frame.timestamps[split.test.start:split.test.stop]
    report = MetricsReport(
        generated_at=cfg.generated_at or format_timestamp(int(prep.frame.timestamps[-1])),
        config_digest=cfg.digest(),
        meta={
            "targets": list(cfg.targets),
            "models": [m for m in MODEL_ORDER if m in cfg.models],
            "n_rows": len(prep.frame),
            "split": split.to_dict(),
            "test_start": format_timestamp(int(test_ts[0])),
            "gaps_filled": len(prep.gap_log),
            "anomalies_replaced": dict(sorted(prep.replacements.items())),
            "features": selections,
        },
    )
    forecasts = {}
    for run in runs:
        actual = prep.frame[run.target][split.test.start:split.test.stop]
        for s in ("train", "val"):
            if s in run.predictions:
                y, yhat = run.predictions[s]
                report.add(run.model_name, run.target, s, score_all(y, yhat))
        report.add(run.model_name, run.target, "test", score_all(actual, run.predictions["test"]))
        forecasts[(run.model_name, run.target)] = (test_ts, actual, run.predictions["test"])
    for t in cfg.targets:
        base = persistence(targets[t])
        actual = prep.frame[t][split.test.start:split.test.stop]
        for s in ("train", "val"):
            report.persistence.append({"model": "persistence", "target": t, "split": s,
                                       **score_all(*base[s])})
        pt = score_all(actual, base["test"])
        report.persistence.append({"model": "persistence", "target": t, "split": "test", **pt})
        for m in report.meta["models"]:
            r = report.get(m, t, "test")
            report.relative_rmse[f"{m}/{t}"] = (r["rmse"] / pt["rmse"]) if pt["rmse"] > 0 else None

    result = BenchResult(report, runs, forecasts, prep, targets)
    if out_dir is not None:
        _stage("write", write_artifacts, result, cfg, Path(out_dir))
    return result


def write_artifacts(result: BenchResult, cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(result.report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(result.report.to_text(), encoding="utf-8")
    models_dir = out / "models"
    fc_dir = out / "forecasts"
    models_dir.mkdir(exist_ok=True)
    fc_dir.mkdir(exist_ok=True)
    for run in result.runs:
        stem = f"{run.model_name}_{run.target}"
        (models_dir / f"{stem}.json").write_text(
            json.dumps(run.document, indent=1) + "\n", encoding="utf-8")
        ts, actual, fc = result.forecasts[(run.model_name, run.target)]
        TimeSeriesFrame(ts, ["actual", "forecast"], np.column_stack([actual, fc])).to_csv(
            fc_dir / f"{stem}.csv")
    if cfg.plots:
        from .plots import emit_plots

        emit_plots(result.report, result.forecasts, out / "plots")
