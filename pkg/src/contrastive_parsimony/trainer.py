"""Fit the shared encoder with the contrastive parsimony loss."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .encoder import (EncoderConfig, EncoderParams, GradientTape, backward, encode, encode_logits,
                      init_params, save_checkpoint)
from .loss import loss_terms, sample_negatives
from .parsimony import soft_parsimony_vectors
from .simulator import Observation
from .topology import Topology, enumerate_topologies

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("step", "epoch", "obs_id", "loss", "term1", "term2", "seconds")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    beta: float = 5.0
    alpha: float = 2.0
    K: int | None = None
    seed: int = 0
    checkpoint_dir: str | None = None
    standardize_inputs: bool = False
    center_output_bias: bool = True
    calibration_observations: int = 20
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass
class StepRecord:
    step: int
    epoch: int
    obs_id: int
    loss: float
    term1: float
    term2: float
    seconds: float


@dataclass
class TrainHistory:
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def epoch_means(self) -> dict[int, float]:
        by_epoch: dict[int, list[float]] = {}
        for r in self.records:
            by_epoch.setdefault(r.epoch, []).append(r.loss)
        return {e: float(np.mean(v)) for e, v in sorted(by_epoch.items())}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HISTORY_FIELDS)
            for r in self.records:
                w.writerow([r.step, r.epoch, r.obs_id, repr(r.loss), repr(r.term1), repr(r.term2),
                            f"{r.seconds:.6f}"])


class NonFiniteLossError(FloatingPointError):
    def __init__(self, step: int, obs_id: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step} (observation {obs_id})")
        self.step = step
        self.obs_id = obs_id


def standardize(series) -> np.ndarray:
    """Zero-mean, unit-variance rows; rows with std < 1e-8 are only centred."""
    x = np.asarray(series, dtype=np.float64)
    centred = x - x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    return centred / np.where(std < 1e-8, 1.0, std)


def prepare_inputs(series, standardize_inputs: bool) -> torch.Tensor:
    x = standardize(series) if standardize_inputs else np.asarray(series, dtype=np.float64)
    return torch.as_tensor(x)


def center_output_bias(params: EncoderParams, encoder_config: EncoderConfig,
                       inputs: Sequence[torch.Tensor]) -> EncoderParams:
    """Shift the projection bias so the median logit over ``inputs`` is zero.

    With zero biases the network is positively homogeneous, so at init high and
    low inputs often land on the same side of 0.5. Every leaf is then pushed
    toward one shared state and training collapses to a constant encoder.
    """
    with torch.no_grad():
        logits = torch.cat([encode_logits(x, params, encoder_config).reshape(-1) for x in inputs])
        out = dict(params)
        out["proj.bias"] = params["proj.bias"] - logits.median()
    return out


def pipeline_loss(series: torch.Tensor, obs: Observation, params: EncoderParams,
                  encoder_config: EncoderConfig, topologies: Sequence[Topology],
                  alpha: float, beta: float) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Encode, score ``topologies`` (true one first) softly, apply the contrastive loss."""
    probs = encode(series, params, encoder_config)
    P = soft_parsimony_vectors(obs.instance, topologies, probs, beta)
    first, second = loss_terms(P[0], list(P[1:]), alpha)
    return first + second, first, second


def train(train_set: Sequence[Observation], encoder_config: EncoderConfig, train_config: TrainConfig,
          params: EncoderParams | None = None, all_topologies: Sequence[Topology] | None = None,
          history_path=None) -> tuple[EncoderParams, TrainHistory]:
    if len(train_set) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(train_config.seed)
    if params is None:
        params = init_params(encoder_config, rng)
    if all_topologies is None:
        n_internal = train_set[0].instance.topology.n_splitters + 1
        all_topologies = enumerate_topologies(n_internal)
    n_neg = len(all_topologies) - 1
    K = n_neg if train_config.K is None else train_config.K
    if not 1 <= K <= n_neg:
        raise ValueError(f"K={K} outside [1, {n_neg}]")

    inputs = [prepare_inputs(o.series, train_config.standardize_inputs) for o in train_set]
    if train_config.center_output_bias:
        params = center_output_bias(params, encoder_config, inputs[:train_config.calibration_observations])
    tape_params = {k: v.detach().clone().requires_grad_(True) for k, v in params.items()}
    names = list(tape_params)
    opt = torch.optim.Adam([tape_params[n] for n in names], lr=train_config.learning_rate,
                           betas=train_config.adam_betas, eps=train_config.adam_eps)
    ckpt_dir = Path(train_config.checkpoint_dir) if train_config.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    ckpt_extra = {"standardize_inputs": train_config.standardize_inputs}

    history = TrainHistory()
    step = 0
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(train_set)) if train_config.shuffle else np.arange(len(train_set))
        for i in order:
            t0 = time.perf_counter()
            obs = train_set[i]
            true_topo = obs.instance.topology
            if K == n_neg:
                negs = [g for g in all_topologies if g != true_topo]
            else:
                negs = sample_negatives(all_topologies, true_topo, K, rng)
            tape = GradientTape(tape_params, copy=False)
            loss, first, second = pipeline_loss(inputs[i], obs, tape_params, encoder_config,
                                                [true_topo] + negs, train_config.alpha,
                                                train_config.beta)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise NonFiniteLossError(step, obs.id, value)
            tape.record(loss)
            grads = backward(tape)
            for n in names:
                tape_params[n].grad = grads[n]
            opt.step()
            history.records.append(StepRecord(step, epoch, obs.id, value, float(first.detach()), float(second.detach()),
                                              time.perf_counter() - t0))
            step += 1
        params = {n: tape_params[n].detach().clone() for n in names}
        log.info("epoch %d mean loss %.4f", epoch, history.epoch_means()[epoch])
        if ckpt_dir:
            save_checkpoint(ckpt_dir / f"epoch_{epoch:03d}.json", params, encoder_config, ckpt_extra)

    params = {n: tape_params[n].detach().clone() for n in names}
    if ckpt_dir:
        save_checkpoint(ckpt_dir / "final.json", params, encoder_config, ckpt_extra)
        history.write_csv(ckpt_dir / "history.csv")
    if history_path:
        history.write_csv(history_path)
    return params, history
