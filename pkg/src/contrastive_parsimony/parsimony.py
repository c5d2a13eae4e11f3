"""Per-timepoint parsimony of binary leaf matrices on a network topology.

Three routes to the same quantity:

* ``parsimony_vector`` -- exact small parsimony, computed bottom-up with the
  Fitch set rule. Splitters can have many children (modems plus child
  splitters), so the rule is the multifurcating form: a node keeps the states
  that the most children admit and pays ``n_children - max_count``. For two
  children this is the textbook intersection/union step.
* ``brute_force_column`` -- enumerates every internal state assignment. Test
  oracle only.
* ``soft_parsimony_vector`` -- a Sankoff recursion with unit costs where the
  hard ``min`` is replaced by a log-sum-exp softmin, differentiable in the
  leaf probabilities (torch).
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
import torch

from .topology import NetworkInstance, Topology

MAX_BRUTE_FORCE_INTERNAL = 20


class CapacityError(ValueError):
    pass


def binarize(probs, threshold: float = 0.5) -> np.ndarray:
    """Hard events from probabilities; exactly ``threshold`` maps to 1."""
    if isinstance(probs, torch.Tensor):
        probs = probs.detach().cpu().numpy()
    return (np.asarray(probs) >= threshold).astype(np.uint8)


def _as_bits(X, M: int) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != M:
        raise ValueError(f"expected {M} modem rows, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("event matrix needs at least one column")
    if not np.isin(X, (0, 1)).all():
        raise ValueError("event matrix entries must be 0 or 1")
    return X.astype(np.int64)


def splitter_ones(instance: NetworkInstance, X) -> dict[int, np.ndarray]:
    """Per splitter, the count of attached modems in state 1 for each column."""
    X = _as_bits(X, instance.M)
    return {s: X[list(ms)].sum(axis=0) for s, ms in instance.modems_of.items()}


def _fitch_from_counts(topology: Topology, ones: dict[int, np.ndarray],
                       n_modems: dict[int, int]) -> np.ndarray:
    t = next(iter(ones.values())).shape[0]
    cost = np.zeros(t, dtype=np.int64)
    # state sets as (admits 0, admits 1)
    sets: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for node in topology.postorder:
        kids = topology.children[node]
        c1 = ones.get(node, np.zeros(t, dtype=np.int64)).copy()
        c0 = n_modems.get(node, 0) - c1
        for k in kids:
            a0, a1 = sets[k]
            c0 += a0
            c1 += a1
        n_children = len(kids) + n_modems.get(node, 0)
        best = np.maximum(c0, c1)
        cost += n_children - best
        sets[node] = ((c0 == best).astype(np.int64), (c1 == best).astype(np.int64))
    return cost


def parsimony_vector(instance: NetworkInstance, X) -> np.ndarray:
    """Hard parsimony score of every column of the m x t bit matrix ``X``."""
    ones = splitter_ones(instance, X)
    counts = {s: len(ms) for s, ms in instance.modems_of.items()}
    return _fitch_from_counts(instance.topology, ones, counts)


def parsimony_vectors(instance: NetworkInstance, topologies: Sequence[Topology], X) -> np.ndarray:
    """Hard parsimony vectors for one modem wiring under several splitter trees, shape (G, t)."""
    ones = splitter_ones(instance, X)
    counts = {s: len(ms) for s, ms in instance.modems_of.items()}
    return np.stack([_fitch_from_counts(g, ones, counts) for g in topologies])


def fitch_column(instance: NetworkInstance, column) -> int:
    column = np.asarray(column)
    if column.ndim != 1:
        raise ValueError("column must be a 1-D bit vector")
    return int(parsimony_vector(instance, column[:, None])[0])


def brute_force_column(instance: NetworkInstance, column) -> int:
    topo = instance.topology
    internal = (topo.root_id,) + topo.splitter_ids
    if len(internal) > MAX_BRUTE_FORCE_INTERNAL:
        raise CapacityError(f"{len(internal)} internal nodes exceeds brute-force limit "
                            f"{MAX_BRUTE_FORCE_INTERNAL}")
    column = _as_bits(np.asarray(column)[:, None], instance.M)[:, 0]
    best = None
    for states in itertools.product((0, 1), repeat=len(internal)):
        state = dict(zip(internal, states))
        changes = sum(state[s] != state[p] for s, p in topo.parent.items())
        changes += sum(state[s] != b for s, b in zip(instance.modem_parent, column))
        if best is None or changes < best:
            best = changes
    return int(best)


def brute_force_vector(instance: NetworkInstance, X) -> np.ndarray:
    X = _as_bits(X, instance.M)
    return np.array([brute_force_column(instance, X[:, j]) for j in range(X.shape[1])])


# --- soft relaxation ---------------------------------------------------------

def softmin(a: torch.Tensor, b: torch.Tensor, beta: float) -> torch.Tensor:
    """-(1/beta) log(exp(-beta a) + exp(-beta b)), computed stably."""
    return -torch.logaddexp(-beta * a, -beta * b) / beta


def _as_probs(P, M: int) -> torch.Tensor:
    if not isinstance(P, torch.Tensor):
        P = torch.as_tensor(np.asarray(P, dtype=np.float64))
    if P.dim() != 2 or P.shape[0] != M:
        raise ValueError(f"expected {M} modem rows, got shape {tuple(P.shape)}")
    return P


def splitter_leaf_costs(instance: NetworkInstance, P) -> tuple[torch.Tensor, torch.Tensor]:
    """Summed leaf costs per splitter, shape (S, t), rows in splitter-id order.

    A modem with event probability p costs p if its splitter is in state 0 and
    1 - p if in state 1. These sums are the same for every splitter tree.
    """
    P = _as_probs(P, instance.M)
    topo = instance.topology
    index = torch.as_tensor(np.asarray(instance.modem_parent) - topo.root_id - 1)
    ones = torch.zeros(topo.n_splitters, P.shape[1], dtype=P.dtype).index_add(0, index, P)
    counts = torch.bincount(index, minlength=topo.n_splitters).to(P.dtype)[:, None]
    return ones, counts - ones


def _soft_tree(topology: Topology, leaf0: torch.Tensor, leaf1: torch.Tensor,
               beta: float) -> torch.Tensor:
    base = topology.root_id + 1
    cost: dict[int, tuple[torch.Tensor, torch.Tensor]] = {}
    for node in topology.postorder:
        if node == topology.root_id:
            c0 = torch.zeros_like(leaf0[0])
            c1 = torch.zeros_like(leaf0[0])
        else:
            c0, c1 = leaf0[node - base], leaf1[node - base]
        for k in topology.children[node]:
            k0, k1 = cost[k]
            c0 = c0 + softmin(k0, k1 + 1.0, beta)
            c1 = c1 + softmin(k0 + 1.0, k1, beta)
        cost[node] = (c0, c1)
    r0, r1 = cost[topology.root_id]
    return softmin(r0, r1, beta)


def _check_beta(beta: float) -> None:
    if not beta > 0 or not math.isfinite(beta):
        raise ValueError(f"softmin temperature beta must be positive and finite, got {beta}")


def soft_parsimony_vector(instance: NetworkInstance, P, beta: float) -> torch.Tensor:
    """Differentiable parsimony of an m x t probability matrix (length-t tensor)."""
    _check_beta(beta)
    leaf0, leaf1 = splitter_leaf_costs(instance, P)
    return _soft_tree(instance.topology, leaf0, leaf1, beta)


def soft_parsimony_vectors(instance: NetworkInstance, topologies: Sequence[Topology], P,
                           beta: float) -> torch.Tensor:
    """Soft parsimony for the same modem wiring under each topology, shape (G, t)."""
    _check_beta(beta)
    leaf0, leaf1 = splitter_leaf_costs(instance, P)
    return torch.stack([_soft_tree(g, leaf0, leaf1, beta) for g in topologies])


def softmin_count(instance: NetworkInstance) -> int:
    """Softmin applications per column; bounds the soft/hard gap by count * log(2) / beta."""
    return 2 * instance.topology.n_splitters + 1
