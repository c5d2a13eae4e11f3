"""Flat run configuration: defaults < key=value file < environment < command-line flags."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .encoder import EncoderConfig
from .loss import LossConfig
from .simulator import SimConfig
from .trainer import TrainConfig

ENV_PREFIX = "CPARS_"


@dataclass
class RunConfig:
    # simulation
    n_observations: int = 1000
    series_len: int = 4000
    n_chunks: int = 40
    modem_min: int = 50
    modem_max: int = 100
    event_shift: float = 3.0
    noise_std: float = 0.5
    phi1: float = 0.6
    phi2: float = -0.5
    num_internal: int = 4
    split: float = 0.5
    # encoder
    n_blocks: int = 3
    channels: int = 16
    kernel_size: int = 3
    dilations: str = "1,2,4"
    slope: float = 0.01
    causal: bool = True
    init_scale: float = 1.0
    # training and loss
    epochs: int = 20
    learning_rate: float = 1e-3
    beta: float = 5.0
    alpha: float = 2.0
    K: int = 0  # 0 means every non-true topology
    standardize: bool = False
    center_output_bias: bool = True
    seed: int = 0
    # paths
    data_dir: str = "data"
    train_path: str = ""
    test_path: str = ""
    checkpoint_dir: str = "checkpoints"
    checkpoint: str = ""
    report_path: str = ""

    @property
    def train_file(self) -> Path:
        return Path(self.train_path or Path(self.data_dir) / "train.jsonl")

    @property
    def test_file(self) -> Path:
        return Path(self.test_path or Path(self.data_dir) / "test.jsonl")

    @property
    def checkpoint_file(self) -> Path:
        return Path(self.checkpoint or Path(self.checkpoint_dir) / "final.json")

    def sim_config(self) -> SimConfig:
        return SimConfig(n_observations=self.n_observations, series_len=self.series_len,
                         n_chunks=self.n_chunks, modem_range=(self.modem_min, self.modem_max),
                         event_shift=self.event_shift, noise_std=self.noise_std,
                         ar_coeffs=(self.phi1, self.phi2), num_internal_total=self.num_internal,
                         seed=self.seed)

    def encoder_config(self) -> EncoderConfig:
        dil = tuple(int(d) for d in str(self.dilations).split(",") if d.strip())
        return EncoderConfig(n_blocks=self.n_blocks, channels=self.channels,
                             kernel_size=self.kernel_size, dilations=dil, slope=self.slope,
                             causal=self.causal, init_scale=self.init_scale)

    def loss_config(self) -> LossConfig:
        return LossConfig(alpha=self.alpha, K=self.K or None)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, beta=self.beta,
                           alpha=self.alpha, K=self.K or None, seed=self.seed,
                           checkpoint_dir=self.checkpoint_dir, standardize_inputs=self.standardize,
                           center_output_bias=self.center_output_bias)

    def dump(self) -> str:
        return "\n".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))

    def updated(self, values: Mapping[str, str | object]) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown config key {key!r}")
            changes[key] = parse_value(types[key], raw)
        return dataclasses.replace(self, **changes)


def parse_value(type_name, raw):
    if not isinstance(raw, str):
        return raw
    kind = type_name if isinstance(type_name, str) else type_name.__name__
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    names = {f.name.lower(): f.name for f in fields(RunConfig)}
    out = {}
    for k, v in environ.items():
        if k.startswith(ENV_PREFIX):
            name = names.get(k[len(ENV_PREFIX):].lower())
            if name:
                out[name] = v
    return out


def load_run_config(path=None, overrides: Mapping[str, object] | None = None,
                    environ: Mapping[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        cfg = cfg.updated(read_config_file(path))
    cfg = cfg.updated(env_overrides(environ))
    if overrides:
        cfg = cfg.updated({k: v for k, v in overrides.items() if v is not None})
    return cfg
