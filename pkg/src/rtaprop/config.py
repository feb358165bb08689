"""Run configuration: flat key-value file with units in the key names.

Example::

    dt_s: 1.0
    sigma_a2_m2s4: 1.0
    q_max_scale: 1.0e8
    q_min_scale: 1.0
    k_gain: 10.0
    lpa: 0.0
    progress_mode: time
    confidence: 0.95
    delta_threshold: 1.0
    v_bar0_mps: null
    mc_samples: 10000
    mc_block: 128
    seed: 0
    ulpa_growth_rate: 1.06
    ulpa_activation_fraction: 0.6666666666666666
    ulpa_rta_tolerance_s: 10.0
    tune_max_rms_m: 500.0
    tune_train_fraction: 0.7

Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .baseline import McConfig, UlpaConfig
from .errors import ConfigError
from .kalman import GATED_ACTIVATION, FilterConfig
from .tuning import TuningOptions

DEFAULTS: dict = {
    "dt_s": 1.0,
    "sigma_a2_m2s4": 1.0,
    "q_max_scale": 1.0e8,
    "q_min_scale": 1.0,
    "k_gain": 10.0,
    "lpa": 0.0,
    "progress_mode": "time",
    "confidence": 0.95,
    "delta_threshold": 1.0,
    "v_bar0_mps": None,
    "mc_samples": 10_000,
    "mc_block": 128,
    "seed": 0,
    "ulpa_growth_rate": 1.06,
    "ulpa_activation_fraction": GATED_ACTIVATION,
    "ulpa_rta_tolerance_s": 10.0,
    "tune_max_rms_m": 500.0,
    "tune_train_fraction": 0.7,
}


@dataclass(frozen=True)
class RunConfig:
    """All resolved parameters for a CLI run."""

    values: dict

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def filter_config(self) -> FilterConfig:
        v = self.values
        return FilterConfig(
            dt=float(v["dt_s"]),
            sigma_a2=float(v["sigma_a2_m2s4"]),
            q_max_scale=float(v["q_max_scale"]),
            q_min_scale=float(v["q_min_scale"]),
            k_gain=float(v["k_gain"]),
            lpa=float(v["lpa"]),
            progress_mode=str(v["progress_mode"]),
        )

    def mc_config(self, seed: int | None = None) -> McConfig:
        v = self.values
        return McConfig(
            samples=int(v["mc_samples"]),
            seed=self.seed if seed is None else seed,
            block=int(v["mc_block"]),
        )

    def ulpa_config(self) -> UlpaConfig:
        v = self.values
        return UlpaConfig(
            growth_rate=float(v["ulpa_growth_rate"]),
            activation_fraction=float(v["ulpa_activation_fraction"]),
            rta_tolerance=float(v["ulpa_rta_tolerance_s"]),
        )

    def tuning_options(self, seed: int | None = None, jobs: int = 1) -> TuningOptions:
        v = self.values
        return TuningOptions(
            max_rms=float(v["tune_max_rms_m"]),
            train_fraction=float(v["tune_train_fraction"]),
            seed=self.seed if seed is None else seed,
            confidence=float(v["confidence"]),
            delta=float(v["delta_threshold"]),
            v_bar0=None if v["v_bar0_mps"] is None else float(v["v_bar0_mps"]),
            jobs=jobs,
        )

    @property
    def confidence(self) -> float:
        return float(self.values["confidence"])

    @property
    def delta(self) -> float:
        return float(self.values["delta_threshold"])

    @property
    def v_bar0(self) -> float | None:
        v = self.values["v_bar0_mps"]
        return None if v is None else float(v)


def parse_config(text: str | None) -> RunConfig:
    """Merge a config document over the defaults; reject unknown keys."""
    values = dict(DEFAULTS)
    if text is not None and text.strip():
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a flat key-value mapping")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(doc)
    cfg = RunConfig(values=values)
    cfg.filter_config()  # validate eagerly
    cfg.mc_config()
    cfg.ulpa_config()
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return parse_config(None)
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
