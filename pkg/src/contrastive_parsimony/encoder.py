"""Shared per-modem encoder: dilated (causal) 1-D convolutions ending in a sigmoid.

Every modem row goes through the same parameters, so an m x t series matrix
is handled as a batch of m single-channel signals. Gradients come from torch
autograd; ``GradientTape`` wraps it with an explicit record/backward contract.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

DTYPE = torch.float64
CHECKPOINT_FORMAT = "contrastive-parsimony-encoder"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    n_blocks: int = 3
    channels: int = 16
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 4)
    slope: float = 0.01
    causal: bool = True
    init_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if len(self.dilations) != self.n_blocks:
            raise ValueError(f"need {self.n_blocks} dilations, got {len(self.dilations)}")
        if any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be positive")

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        c_in = 1
        for i in range(self.n_blocks):
            shapes[f"block{i}.weight"] = (self.channels, c_in, self.kernel_size)
            shapes[f"block{i}.bias"] = (self.channels,)
            c_in = self.channels
        shapes["proj.weight"] = (1, c_in, 1)
        shapes["proj.bias"] = (1,)
        return shapes


EncoderParams = dict  # name -> float64 tensor, keys from EncoderConfig.param_shapes()


def init_params(config: EncoderConfig, rng: np.random.Generator) -> EncoderParams:
    """Fan-in scaled uniform kernels, zero biases."""
    params = {}
    for name, shape in config.param_shapes().items():
        if name.endswith(".bias"):
            params[name] = torch.zeros(shape, dtype=DTYPE)
            continue
        fan_in = shape[1] * shape[2]
        bound = config.init_scale * math.sqrt(6.0 / fan_in)
        params[name] = torch.as_tensor(rng.uniform(-bound, bound, size=shape), dtype=DTYPE)
    return params


def check_params(params: EncoderParams, config: EncoderConfig) -> None:
    shapes = config.param_shapes()
    if set(params) != set(shapes):
        raise ValueError(f"parameter names {sorted(params)} do not match config {sorted(shapes)}")
    for name, shape in shapes.items():
        if tuple(params[name].shape) != shape:
            raise ValueError(f"{name}: expected shape {shape}, got {tuple(params[name].shape)}")


def _pad(x: torch.Tensor, width: int, causal: bool) -> torch.Tensor:
    if causal:
        return F.pad(x, (width, 0))
    return F.pad(x, (width // 2, width - width // 2))


def encode_logits(series, params: EncoderParams, config: EncoderConfig) -> torch.Tensor:
    x = series if isinstance(series, torch.Tensor) else torch.as_tensor(np.asarray(series, dtype=np.float64))
    if x.dim() != 2 or x.shape[1] < 1:
        raise ValueError(f"series must be an m x t matrix with t >= 1, got shape {tuple(x.shape)}")
    check_params(params, config)
    h = x.to(DTYPE)[:, None, :]
    for i, d in enumerate(config.dilations):
        h = _pad(h, (config.kernel_size - 1) * d, config.causal)
        h = F.conv1d(h, params[f"block{i}.weight"], params[f"block{i}.bias"], dilation=d)
        h = F.leaky_relu(h, config.slope)
    out = F.conv1d(h, params["proj.weight"], params["proj.bias"])
    return out[:, 0, :]


def encode(series, params: EncoderParams, config: EncoderConfig) -> torch.Tensor:
    """Per-timepoint event probabilities, an m x t tensor in (0, 1)."""
    return torch.sigmoid(encode_logits(series, params, config))


class GradientTape:
    """Single-use record of one forward pass for reverse-mode gradients.

    ``tape.params`` are leaf copies of the watched parameters; build the loss
    from them, hand it to ``record``, then call ``backward``.
    """

    def __init__(self, params: EncoderParams, copy: bool = True):
        if copy:
            params = {k: v.detach().clone().requires_grad_(True) for k, v in params.items()}
        elif not all(v.requires_grad for v in params.values()):
            raise ValueError("uncopied tape parameters must require grad")
        self.params = params
        self._loss: torch.Tensor | None = None
        self._used = False

    def record(self, loss: torch.Tensor) -> torch.Tensor:
        if loss.dim() != 0:
            raise ValueError("the recorded loss must be a scalar")
        self._loss = loss
        return loss


def backward(tape: GradientTape, seed: float = 1.0) -> dict[str, torch.Tensor]:
    """Gradients of ``seed * loss`` with respect to every watched parameter."""
    if tape._loss is None:
        raise RuntimeError("backward called before a forward pass was recorded")
    if tape._used:
        raise RuntimeError("gradient tape already consumed")
    tape._used = True
    names = list(tape.params)
    grads = torch.autograd.grad(tape._loss, [tape.params[n] for n in names],
                                grad_outputs=torch.tensor(seed, dtype=tape._loss.dtype),
                                allow_unused=True)
    return {n: torch.zeros_like(tape.params[n]) if g is None else g.detach()
            for n, g in zip(names, grads)}


def save_checkpoint(path, params: EncoderParams, config: EncoderConfig, extra: dict | None = None) -> None:
    path = Path(path)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "extra": extra or {},
        "params": {k: {"shape": list(v.shape), "data": v.detach().reshape(-1).tolist()}
                   for k, v in params.items()},
    }
    tmp = path.with_name(path.name + ".partial")
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[EncoderParams, EncoderConfig, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not an encoder checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    config = EncoderConfig(**doc["config"])
    params = {k: torch.tensor(v["data"], dtype=DTYPE).reshape(v["shape"]) for k, v in doc["params"].items()}
    check_params(params, config)
    return params, config, doc.get("extra", {})
