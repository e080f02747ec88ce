"""Run configuration: TOML or JSON files, with CLI overrides applied on top."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .models.additive import AdditiveConfig
from .models.ar_additive import ARAdditiveConfig
from .models.gbt import GbtConfig
from .models.sarimax import SarimaxOrder

MODEL_NAMES = ("fbp", "np", "sarimax", "gbt")
SOURCES = ("live", "cache", "fixture", "synthetic")
TARGETS = ("pm2_5", "pm10")
BEIJING = (39.9042, 116.4074)

FINAL_FEATURES = {
    "pm2_5": ["pm10", "no", "no2", "co", "so2"],
    "pm10": ["pm2_5", "no", "no2", "co", "so2"],
}
CANDIDATES = ["pm2_5", "pm10", "co", "no", "no2", "so2", "o3", "nh3", "temp", "dew_point"]


@dataclass
class DataConfig:
    source: str = "synthetic"
    path: str | None = None
    fixture_dir: str | None = None
    latitude: float = BEIJING[0]
    longitude: float = BEIJING[1]
    start: str = "2020-12-01T00:00:00Z"
    end: str = "2025-06-30T23:00:00Z"
    hours: int = 3 * 8766


@dataclass
class FeatureConfig:
    mode: str = "fixed"
    candidates: list = field(default_factory=lambda: list(CANDIDATES))
    k: int = 5
    bins: int | None = None
    fixed: dict = field(default_factory=lambda: copy.deepcopy(FINAL_FEATURES))


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "out"
    models: list = field(default_factory=lambda: list(MODEL_NAMES))
    targets: list = field(default_factory=lambda: list(TARGETS))
    zscore_threshold: float = 5.0
    fbp_val_free: bool = False
    n_jobs: int = 1
    plots: bool = True
    generated_at: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    fbp: dict = field(default_factory=dict)
    np: dict = field(default_factory=dict)
    sarimax: dict = field(default_factory=dict)
    gbt: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.data.source not in SOURCES:
            raise ValueError(f"data.source must be one of {SOURCES}, got {self.data.source!r}")
        bad = [m for m in self.models if m not in MODEL_NAMES]
        if bad:
            raise ValueError(f"unknown model(s) {bad}; choose from {MODEL_NAMES}")
        bad = [t for t in self.targets if t not in TARGETS]
        if bad:
            raise ValueError(f"unknown target(s) {bad}; choose from {TARGETS}")
        if self.features.mode not in ("fixed", "mrmr"):
            raise ValueError("features.mode must be 'fixed' or 'mrmr'")
        if not self.zscore_threshold > 0:
            raise ValueError("zscore_threshold must be positive")
        # building the model configs validates their fields
        self.fbp_config(), self.np_config(), self.sarimax_order(), self.gbt_config()

    # model configs

    def fbp_config(self, regressors=()) -> AdditiveConfig:
        kw = dict(self.fbp)
        if "seasonalities" in kw:
            kw["seasonalities"] = tuple(tuple(s) for s in kw["seasonalities"])
        return AdditiveConfig(**kw, regressors=tuple(regressors))

    def np_config(self, regressors=()) -> ARAdditiveConfig:
        kw = dict(self.np)
        n_lags = kw.pop("n_lags", 7)
        reg_lags = kw.pop("regressor_lags", 0)
        if "seasonalities" in kw:
            kw["seasonalities"] = tuple(tuple(s) for s in kw["seasonalities"])
        return ARAdditiveConfig(AdditiveConfig(**kw, regressors=tuple(regressors)),
                                n_lags, reg_lags)

    def sarimax_order(self) -> SarimaxOrder:
        p, d, q = self.sarimax.get("order", (1, 0, 1))
        P, D, Q, s = self.sarimax.get("seasonal_order", (1, 0, 1, 24))
        return SarimaxOrder(p, d, q, P, D, Q, s)

    def gbt_config(self) -> GbtConfig:
        return GbtConfig(**self.gbt)

    # (de)serialization

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the run settings; the output directory is not part of it."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = copy.deepcopy(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        data = DataConfig(**d.pop("data", {}))
        features = FeatureConfig(**d.pop("features", {}))
        return cls(data=data, features=features, **d)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a TOML (``.toml``) or JSON config and apply dotted-key overrides."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return RunConfig.from_dict(raw)
