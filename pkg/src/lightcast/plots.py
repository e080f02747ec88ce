"""Deterministic SVG output: forecast overlays and a test-error bar chart."""

from __future__ import annotations

from pathlib import Path

import numpy as np

_RC = {"svg.hashsalt": "lightcast", "svg.fonttype": "none", "path.simplify": False}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def overlay_plot(path, timestamps, actual, forecast, title: str):
    plt = _pyplot()
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(9, 3.5))
        hours = (np.asarray(timestamps) - timestamps[0]) / 3600.0
        ax.plot(hours, actual, color="black", lw=1.2, label="actual")
        ax.plot(hours, forecast, color="tab:red", lw=1.2, ls="--", label="forecast")
        ax.set_xlabel("hours into test window")
        ax.set_ylabel("µg/m³")
        ax.set_title(title)
        ax.legend(loc="upper right")
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)


def bar_chart(path, rows: list):
    """Grouped MAE/RMSE bars; ``rows`` holds (label, mae, rmse) tuples."""
    plt = _pyplot()
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows) + 2), 3.5))
        x = np.arange(len(rows))
        ax.bar(x - 0.2, [r[1] for r in rows], width=0.4, label="MAE")
        ax.bar(x + 0.2, [r[2] for r in rows], width=0.4, label="RMSE")
        ax.set_xticks(x)
        ax.set_xticklabels([r[0] for r in rows], rotation=30, ha="right")
        ax.set_ylabel("test error (µg/m³)")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
        plt.close(fig)


def emit_plots(report, forecasts: dict, out_dir) -> list:
    """Write one overlay per (model, target) in ``forecasts`` and one bar chart.

    ``forecasts`` maps ``(model, target)`` to ``(timestamps, actual, forecast)``.
    Returns the written paths in a deterministic order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for (model, target) in sorted(forecasts):
        ts, actual, fc = forecasts[(model, target)]
        p = out / f"forecast_{model}_{target}.svg"
        overlay_plot(p, np.asarray(ts), np.asarray(actual), np.asarray(fc),
                     f"{model} / {target}: test window")
        written.append(p)
    bars = [(f"{r['model']}/{r['target']}", r["mae"], r["rmse"])
            for r in report.rows if r["split"] == "test"]
    if bars:
        p = out / "test_errors.svg"
        bar_chart(p, bars)
        written.append(p)
    return written
