"""Historical data clients for OpenWeather (air pollution) and Open-Meteo
(weather archive), plus fixture replay for offline runs.

Requests are chunked into 30-day windows, rate limited per provider with a
token bucket and retried with exponential backoff on transient failures.
Provider units are passed through unchanged.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .exceptions import (AuthError, EmptyPayloadError, HTTPError, MalformedPayloadError,
                         ProviderError)
from .frame import HOUR, TimeSeriesFrame, enforce_hourly_grid, parse_timestamp

logger = logging.getLogger(__name__)

OPENWEATHER_URL = "https://api.openweathermap.org"
OPENWEATHER_PATH = "/data/2.5/air_pollution/history"
OPEN_METEO_URL = "https://archive-api.open-meteo.com"
OPEN_METEO_PATH = "/v1/archive"
API_KEY_ENV = "OPENWEATHER_API_KEY"
FIXTURE_ENV = "LIGHTCAST_FIXTURE_DIR"

POLLUTANT_COLUMNS = ("pm2_5", "pm10", "co", "no", "no2", "so2", "o3", "nh3")
WEATHER_COLUMNS = ("temp", "dew_point")
WEATHER_FIELDS = {"temp": "temperature_2m", "dew_point": "dew_point_2m"}

CHUNK_SECONDS = 30 * 24 * HOUR
FIXTURE_FILES = {
    OPENWEATHER_PATH: "openweather_air_pollution_history.json",
    OPEN_METEO_PATH: "open_meteo_archive.json",
}


@dataclass(frozen=True)
class ProviderQuery:
    latitude: float
    longitude: float
    start: int
    end: int
    api_key: str | None = None

    def __post_init__(self):
        for name in ("start", "end"):
            v = getattr(self, name)
            if isinstance(v, str):
                object.__setattr__(self, name, parse_timestamp(v))
            elif isinstance(v, datetime):
                object.__setattr__(self, name, int(v.timestamp()))
            else:
                object.__setattr__(self, name, int(v))
        if not self.start < self.end:
            raise ValueError("query start must be before end")
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ValueError(f"invalid coordinates ({self.latitude}, {self.longitude})")

    def __repr__(self):
        key = "***" if self.api_key else None
        return (f"ProviderQuery(latitude={self.latitude}, longitude={self.longitude}, "
                f"start={self.start}, end={self.end}, api_key={key})")

    def chunks(self, size: int = CHUNK_SECONDS):
        """Consecutive inclusive windows ``[a, b]`` covering ``[start, end]``."""
        a = self.start
        while a <= self.end:
            b = min(a + size - HOUR, self.end)
            yield a, b
            a = b + HOUR


class TokenBucket:
    """Blocking token bucket; ``rate`` tokens per ``per`` seconds."""

    def __init__(self, rate: float = 50, per: float = 60.0, clock=time.monotonic,
                 sleep=time.sleep):
        self.capacity = float(rate)
        self.fill_rate = float(rate) / per
        self.tokens = float(rate)
        self.clock = clock
        self.sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.fill_rate)
                self._last = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.fill_rate
            self.sleep(wait)


class HttpTransport:
    """GET with retries on connection errors, 429 and 5xx responses."""

    def __init__(self, base_url: str, session=None, retries: int = 4, backoff: float = 1.0,
                 timeout: float = 30.0, limiter: TokenBucket | None = None, sleep=time.sleep):
        self.base_url = base_url.rstrip("/")
        self.session = session
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.limiter = limiter or TokenBucket()
        self.sleep = sleep

    def _session(self):
        if self.session is None:
            import requests

            self.session = requests.Session()
        return self.session

    def get(self, path: str, params: dict) -> dict:
        import requests

        url = self.base_url + path
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            self.limiter.acquire()
            try:
                resp = self._session().get(url, params=params, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = HTTPError(f"request to {url} failed: {exc}")
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"{url}: HTTP {resp.status_code}", resp.status_code)
            if resp.status_code == 429 or resp.status_code >= 500:
                last = HTTPError(f"{url}: HTTP {resp.status_code}", resp.status_code)
                continue
            if resp.status_code >= 400:
                raise HTTPError(f"{url}: HTTP {resp.status_code}", resp.status_code)
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedPayloadError(f"{url}: response is not JSON") from exc
        raise last


class FixtureTransport:
    """Replays recorded provider responses from a directory."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)

    def get(self, path: str, params: dict) -> dict:
        fname = FIXTURE_FILES.get(path)
        if fname is None:
            raise ProviderError(f"no fixture mapping for endpoint {path}")
        fpath = self.directory / fname
        try:
            text = fpath.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ProviderError(f"fixture file missing: {fpath}") from None
        try:
            return json.loads(text)
        except ValueError as exc:
            raise MalformedPayloadError(f"{fpath}: invalid JSON") from exc


def default_transport(base_url: str, fixture_dir=None):
    fixture_dir = fixture_dir or os.environ.get(FIXTURE_ENV)
    if fixture_dir:
        return FixtureTransport(fixture_dir)
    return HttpTransport(base_url)


def _frame_from_rows(rows: dict, columns, start: int, end: int, what: str) -> TimeSeriesFrame:
    keep = sorted(t for t in rows if start <= t <= end)
    if not keep:
        raise EmptyPayloadError(f"{what}: no observations in the requested window")
    ts = np.array(keep, dtype=np.int64)
    values = np.array([rows[t] for t in keep], dtype=float).reshape(len(keep), len(columns))
    frame = TimeSeriesFrame(ts, columns, values)
    if len(frame) >= 2:
        result = enforce_hourly_grid(frame)
        if result.gap_log:
            logger.warning("%s: interpolated %d missing hours", what, len(result.gap_log))
        frame = result.frame
    return frame


class OpenWeatherClient:
    def __init__(self, transport=None, chunk_seconds: int = CHUNK_SECONDS):
        self.transport = transport or default_transport(OPENWEATHER_URL)
        self.chunk_seconds = chunk_seconds

    @staticmethod
    def parse(payload) -> dict:
        """Map epoch seconds -> pollutant row from one history response."""
        if not isinstance(payload, dict) or not isinstance(payload.get("list"), list):
            raise MalformedPayloadError("OpenWeather payload has no 'list' array")
        rows = {}
        for item in payload["list"]:
            try:
                dt = int(item["dt"])
                comp = item["components"]
                rows[dt] = [float(comp[c]) for c in POLLUTANT_COLUMNS]
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedPayloadError(f"bad OpenWeather record: {exc!r}") from exc
        return rows

    def fetch(self, q: ProviderQuery) -> TimeSeriesFrame:
        api_key = q.api_key or os.environ.get(API_KEY_ENV)
        if not api_key and not isinstance(self.transport, FixtureTransport):
            raise AuthError(f"OpenWeather needs an API key (set {API_KEY_ENV})")
        rows = {}
        for a, b in q.chunks(self.chunk_seconds):
            params = {"lat": q.latitude, "lon": q.longitude, "start": a, "end": b,
                      "appid": api_key or ""}
            chunk = self.parse(self.transport.get(OPENWEATHER_PATH, params))
            rows.update({t: v for t, v in chunk.items() if a <= t <= b})
        return _frame_from_rows(rows, POLLUTANT_COLUMNS, q.start, q.end, "OpenWeather")


class OpenMeteoClient:
    def __init__(self, transport=None, chunk_seconds: int = CHUNK_SECONDS):
        self.transport = transport or default_transport(OPEN_METEO_URL)
        self.chunk_seconds = chunk_seconds

    @staticmethod
    def parse(payload) -> dict:
        if not isinstance(payload, dict) or not isinstance(payload.get("hourly"), dict):
            raise MalformedPayloadError("Open-Meteo payload has no 'hourly' block")
        hourly = payload["hourly"]
        times = hourly.get("time")
        if not isinstance(times, list):
            raise MalformedPayloadError("Open-Meteo payload has no hourly 'time' array")
        series = []
        for col in WEATHER_COLUMNS:
            arr = hourly.get(WEATHER_FIELDS[col])
            if not isinstance(arr, list) or len(arr) != len(times):
                raise MalformedPayloadError(
                    f"Open-Meteo field {WEATHER_FIELDS[col]!r} does not match the time array"
                )
            series.append(arr)
        rows = {}
        for i, stamp in enumerate(times):
            vals = [s[i] for s in series]
            if any(v is None for v in vals):
                continue
            try:
                rows[parse_timestamp(stamp)] = [float(v) for v in vals]
            except (TypeError, ValueError) as exc:
                raise MalformedPayloadError(f"bad Open-Meteo record: {exc!r}") from exc
        return rows

    def fetch(self, q: ProviderQuery) -> TimeSeriesFrame:
        rows = {}
        for a, b in q.chunks(self.chunk_seconds):
            params = {
                "latitude": q.latitude, "longitude": q.longitude,
                "start_date": _date(a), "end_date": _date(b),
                "hourly": "temperature_2m,dew_point_2m", "timezone": "UTC",
            }
            chunk = self.parse(self.transport.get(OPEN_METEO_PATH, params))
            rows.update({t: v for t, v in chunk.items() if a <= t <= b})
        return _frame_from_rows(rows, WEATHER_COLUMNS, q.start, q.end, "Open-Meteo")


def _date(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")


def fetch_pollutants(q: ProviderQuery, client: OpenWeatherClient | None = None) -> TimeSeriesFrame:
    return (client or OpenWeatherClient()).fetch(q)


def fetch_weather(q: ProviderQuery, client: OpenMeteoClient | None = None) -> TimeSeriesFrame:
    return (client or OpenMeteoClient()).fetch(q)


def merge_sources(pollutants: TimeSeriesFrame, weather: TimeSeriesFrame) -> TimeSeriesFrame:
    """Inner join on timestamp with the column union, then grid enforcement."""
    overlap = [c for c in weather.columns if c in pollutants.columns]
    if overlap:
        raise ValueError(f"column(s) present in both sources: {overlap}")
    common, ia, ib = np.intersect1d(pollutants.timestamps, weather.timestamps,
                                    assume_unique=True, return_indices=True)
    if common.size == 0:
        raise EmptyPayloadError("pollutant and weather frames do not overlap in time")
    values = np.hstack([pollutants.values[ia], weather.values[ib]])
    merged = TimeSeriesFrame(common, pollutants.columns + weather.columns, values)
    if len(merged) < 2:
        return merged
    return enforce_hourly_grid(merged).frame


def fetch_all(q: ProviderQuery, fixture_dir=None) -> TimeSeriesFrame:
    pol = OpenWeatherClient(default_transport(OPENWEATHER_URL, fixture_dir)).fetch(q)
    wx = OpenMeteoClient(default_transport(OPEN_METEO_URL, fixture_dir)).fetch(q)
    return merge_sources(pol, wx)
