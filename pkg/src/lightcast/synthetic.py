"""Seeded generator of Beijing-like hourly pollutant and weather series.

A latent pollution load (yearly + weekly harmonics, slow trend and AR(1)
noise) drives the particulate and precursor channels, so the targets are
strongly coupled to the gas regressors, as in the real data. Weather
channels follow their own seasonal cycles and only weakly relate to the load.
"""

from __future__ import annotations

import numpy as np

from .frame import HOUR, TimeSeriesFrame, parse_timestamp

POLLUTANTS = ("pm2_5", "pm10", "co", "no", "no2", "so2", "o3", "nh3")
WEATHER = ("temp", "dew_point")
DEFAULT_START = "2020-12-01T00:00:00Z"


def _ar1(rng, n, phi, sigma):
    e = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    out[0] = e[0] / np.sqrt(1 - phi ** 2)
    for t in range(1, n):
        out[t] = phi * out[t - 1] + e[t]
    return out


def generate(n_hours: int = 24 * 365, seed: int = 0, start: str | int = DEFAULT_START,
             ar_phi: float = 0.95) -> TimeSeriesFrame:
    """Hourly frame with the ten provider columns.

    Parameters
    ----------
    n_hours : int
        Number of rows.
    seed : int
        Seed for ``numpy.random.default_rng``.
    start : str or int
        First timestamp (ISO-8601 UTC or epoch seconds).
    ar_phi : float
        Persistence of the AR(1) component of the latent load.
    """
    rng = np.random.default_rng(seed)
    t0 = parse_timestamp(start) if isinstance(start, str) else int(start)
    ts = t0 + HOUR * np.arange(n_hours, dtype=np.int64)
    H = ts / HOUR
    yearly = 2 * np.pi * H / 8766.0
    weekly = 2 * np.pi * H / 168.0
    daily = 2 * np.pi * H / 24.0
    frac = np.arange(n_hours) / max(n_hours - 1, 1)

    load = (25 * np.cos(yearly) + 6 * np.cos(2 * yearly + 0.4)
            + 8 * np.sin(weekly) + 3 * np.cos(2 * weekly)
            - 6 * frac
            + _ar1(rng, n_hours, ar_phi, 3.0))

    def noise(sd):
        return rng.normal(0.0, sd, n_hours)

    pm2_5 = 70 + 2.0 * load + noise(4.0)
    pm10 = 25 + 1.25 * pm2_5 + noise(6.0)
    co = 450 + 14 * load + noise(25.0)
    no = 6 + 0.35 * load + noise(1.0)
    no2 = 35 + 0.9 * load + noise(3.0)
    so2 = 10 + 0.25 * load + noise(1.0)
    o3 = 55 - 0.6 * load + 12 * np.sin(daily - 1.0) + noise(6.0)
    nh3 = 4 + 0.02 * load + noise(0.8)
    temp = 12 - 15 * np.cos(yearly) + 5 * np.sin(daily - 2.0) + noise(1.5)
    dew_point = temp - 9 + 0.05 * load + noise(2.5)

    cols = dict(pm2_5=pm2_5, pm10=pm10, co=co, no=no, no2=no2, so2=so2, o3=o3, nh3=nh3,
                temp=temp, dew_point=dew_point)
    values = np.column_stack([cols[c] for c in POLLUTANTS + WEATHER])
    # concentrations are nonnegative
    values[:, :len(POLLUTANTS)] = np.maximum(values[:, :len(POLLUTANTS)], 0.1)
    return TimeSeriesFrame(ts, POLLUTANTS + WEATHER, values)
