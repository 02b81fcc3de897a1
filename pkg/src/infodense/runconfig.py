"""Run configuration: JSON file + flag overrides, validated before any work.

Unknown keys are rejected outright so a typo cannot silently fall back to a
default. The resolved configuration is hashed (sha256 of its canonical JSON)
and every artifact written by the CLI carries that hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .regress import TrainConfig

OUTPUT_DIR_ENV = "INFODENSE_OUTPUT_DIR"

METHOD_ALIASES = {
    "angle": "eigen_angle",
    "mi": "mutual_info",
    "random": "random",
    "variance": "variance",
    "correlation": "correlation",
}

_TOP_LEVEL_KEYS = {
    "input_path",
    "input_format",
    "columns",
    "interval_minutes",
    "policy",
    "frame_len",
    "stride",
    "downsample_factor",
    "mi_bins",
    "mi_strategy",
    "method",
    "k",
    "k_sweep",
    "epsilon",
    "train",
    "seed",
    "output_dir",
    "figures",
    "synth",
    "cmi",
}

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}

_SYNTH_KEYS = {
    "n_clusters",
    "sensors_per_cluster",
    "n_samples",
    "frame_len",
    "waveform",
    "gain_range",
    "offset_range",
    "noise_sigma",
    "seed",
}

_CMI_KEYS = {"input_block", "targets", "include_random", "surrogate", "random_scale"}


@dataclass
class RunConfig:
    """Everything a CLI run needs, resolved and validated."""

    input_path: str | None = None
    input_format: str = "wide"
    columns: dict[str, str] = field(default_factory=dict)
    interval_minutes: float = 15.0
    policy: str = "drop_incomplete"
    frame_len: int = 96
    stride: int | None = None
    downsample_factor: int = 1
    mi_bins: int = 32
    mi_strategy: str = "equal_width"
    method: str = "angle"
    k: int = 3
    k_sweep: list[int] | None = None
    epsilon: float = 0.01
    train: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"
    figures: bool = True
    synth: dict[str, Any] = field(default_factory=dict)
    cmi: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.input_format not in ("wide", "long"):
            raise ConfigError(f"input_format must be wide or long, got {self.input_format!r}")
        if self.policy not in ("drop_incomplete", "forward_fill"):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.method not in METHOD_ALIASES:
            raise ConfigError(
                f"unknown method {self.method!r}; choose from {sorted(METHOD_ALIASES)}"
            )
        if self.interval_minutes <= 0:
            raise ConfigError("interval_minutes must be positive")
        if self.frame_len < 2:
            raise ConfigError("frame_len must be >= 2")
        if self.stride is not None and self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.downsample_factor < 1:
            raise ConfigError("downsample_factor must be >= 1")
        if self.mi_bins < 2:
            raise ConfigError("mi_bins must be >= 2")
        if self.mi_strategy not in ("equal_width", "equal_frequency"):
            raise ConfigError(f"unknown mi_strategy {self.mi_strategy!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.k_sweep is not None and (
            not self.k_sweep or any(int(k) < 1 for k in self.k_sweep)
        ):
            raise ConfigError("k_sweep must be a nonempty list of positive ints")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        unknown = set(self.train) - _TRAIN_KEYS
        if unknown:
            raise ConfigError(f"unknown train keys: {sorted(unknown)}")
        unknown = set(self.synth) - _SYNTH_KEYS
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        unknown = set(self.cmi) - _CMI_KEYS
        if unknown:
            raise ConfigError(f"unknown cmi keys: {sorted(unknown)}")
        self.train_config()  # surface bad train values now, not mid-run

    def train_config(self) -> TrainConfig:
        params = dict(self.train)
        params.setdefault("seed", self.seed)
        try:
            return TrainConfig(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad train config: {exc}") from exc

    def canonical_method(self) -> str:
        return METHOD_ALIASES[self.method]

    def to_canonical_dict(self) -> dict:
        return {
            "input_path": self.input_path,
            "input_format": self.input_format,
            "columns": dict(sorted(self.columns.items())),
            "interval_minutes": self.interval_minutes,
            "policy": self.policy,
            "frame_len": self.frame_len,
            "stride": self.stride,
            "downsample_factor": self.downsample_factor,
            "mi_bins": self.mi_bins,
            "mi_strategy": self.mi_strategy,
            "method": self.method,
            "k": self.k,
            "k_sweep": self.k_sweep,
            "epsilon": self.epsilon,
            "train": dict(sorted(self.train.items())),
            "seed": self.seed,
            "figures": self.figures,
            "synth": dict(sorted(self.synth.items())),
            "cmi": {k: v for k, v in sorted(self.cmi.items())},
        }

    def config_hash(self) -> str:
        # output_dir is deliberately excluded: moving results elsewhere must
        # not change the recorded identity of the run.
        payload = json.dumps(self.to_canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def resolved_output_dir(self) -> Path:
        override = os.environ.get(OUTPUT_DIR_ENV)
        return Path(override) if override else Path(self.output_dir)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus override values.

    Raises:
        ConfigError: unreadable file, non-object JSON, or unknown keys.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")

    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _TOP_LEVEL_KEYS:
                raise ConfigError(f"unknown override {key!r}")
            data[key] = value

    try:
        config = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    config.validate()
    return config
