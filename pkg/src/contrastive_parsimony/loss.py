"""Contrastive parsimony loss over a positive and several negative topologies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .topology import Topology


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 2.0
    K: int | None = None  # None: every non-true topology

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be >= 1")


def _as_tensor(v) -> torch.Tensor:
    if isinstance(v, torch.Tensor):
        return v
    return torch.as_tensor(np.asarray(v, dtype=np.float64))


def loss_terms(P_pos, P_negs: Sequence, alpha: float) -> tuple[torch.Tensor, torch.Tensor]:
    """(positive parsimony total, separation penalty) of the contrastive loss.

    The penalty is (alpha/2) * sqrt(sum over ordered pairs g1 != g2 of
    1 / (||P(g1) - P(g2)||^2 + 1)^2), pairs drawn from the positive and all
    negatives together.
    """
    if len(P_negs) == 0:
        raise ValueError("need at least one negative parsimony vector")
    vecs = [_as_tensor(P_pos)] + [_as_tensor(p) for p in P_negs]
    t = vecs[0].shape
    if any(v.dim() != 1 or v.shape != t for v in vecs):
        raise ValueError("all parsimony vectors must be 1-D with the same length")
    G = torch.stack(vecs)
    diff = G[:, None, :] - G[None, :, :]
    sq = (diff * diff).sum(-1)
    off = ~torch.eye(len(vecs), dtype=torch.bool)
    penalty = (alpha / 2) * torch.sqrt((1.0 / (sq[off] + 1.0) ** 2).sum())
    return G[0].sum(), penalty


def contrastive_loss(P_pos, P_negs: Sequence, alpha: float) -> torch.Tensor:
    first, second = loss_terms(P_pos, P_negs, alpha)
    return first + second


def sample_negatives(all_topologies: Sequence[Topology], true_topology: Topology, K: int,
                     rng: np.random.Generator) -> list[Topology]:
    """K distinct topologies other than the true one, uniformly without replacement."""
    pool = [g for g in all_topologies if g != true_topology]
    if not 1 <= K <= len(pool):
        raise ValueError(f"K={K} outside [1, {len(pool)}]")
    picks = rng.choice(len(pool), size=K, replace=False)
    return [pool[int(i)] for i in picks]
