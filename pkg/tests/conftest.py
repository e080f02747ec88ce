from pathlib import Path

import numpy as np
import pytest

from lightcast.frame import HOUR, TimeSeriesFrame

FIXTURES = Path(__file__).parent / "fixtures"
T0 = 1609459200  # 2021-01-01T00:00:00Z


def make_frame(columns, n=None, t0=T0, values=None, seed=0):
    """Hourly frame; random normal values unless ``values`` is given."""
    if values is None:
        rng = np.random.default_rng(seed)
        values = rng.normal(size=(n, len(columns)))
    values = np.asarray(values, dtype=float).reshape(-1, len(columns))
    ts = t0 + HOUR * np.arange(values.shape[0], dtype=np.int64)
    return TimeSeriesFrame(ts, list(columns), values)


@pytest.fixture
def fixture_dir():
    return FIXTURES


@pytest.fixture
def no_fixture_env(monkeypatch):
    monkeypatch.delenv("LIGHTCAST_FIXTURE_DIR", raising=False)
    monkeypatch.delenv("OPENWEATHER_API_KEY", raising=False)


# ------------------------------------------------------- acceptance summary

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): numbered acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n, title = marker.args
    props = dict(item.user_properties)
    if call.when == "setup" and call.excinfo is not None:
        status = "SKIP" if call.excinfo.errisinstance(pytest.skip.Exception) else "FAIL"
    elif call.when == "call":
        if call.excinfo is None:
            status = "PASS"
        elif call.excinfo.errisinstance(pytest.skip.Exception):
            status = "SKIP"
        else:
            status = "FAIL"
    else:
        return
    _ACCEPTANCE[n] = (status, title, props.get("elapsed"), props.get("budget"),
                      props.get("note"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        status, title, elapsed, budget, note = _ACCEPTANCE[n]
        timing = f" [{elapsed:.2f} s / budget {budget:g} s]" if elapsed is not None else ""
        extra = f" ({note})" if note else ""
        terminalreporter.write_line(f"criterion {n}: {status}  {title}{timing}{extra}")
