"""Rooted tree topologies over a root node and labeled splitters.

Node ids: the root is ``0`` and splitters are ``1..S``. Modems live in their
own id space ``0..M-1`` and hang off splitters via ``NetworkInstance``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

ROOT_ID = 0
MAX_ENUMERATION_NODES = 8


class InternalEdge(NamedTuple):
    parent_id: int
    child_id: int


@dataclass(frozen=True)
class Topology:
    """A rooted labeled tree; ``parent_vector[i]`` is the parent of ``splitter_ids[i]``."""

    parent_vector: tuple[int, ...]
    root_id: int = ROOT_ID

    def __post_init__(self):
        if len(self.parent_vector) < 1:
            raise ValueError("a topology needs at least one splitter")
        ids = set(self.splitter_ids)
        for s, p in zip(self.splitter_ids, self.parent_vector):
            if p != self.root_id and p not in ids:
                raise ValueError(f"splitter {s} has unknown parent {p}")
            if p == s:
                raise ValueError(f"splitter {s} is its own parent")
        for s in self.splitter_ids:
            seen = set()
            node = s
            while node != self.root_id:
                if node in seen:
                    raise ValueError(f"parent map is cyclic at splitter {s}")
                seen.add(node)
                node = self.parent[node]

    @property
    def splitter_ids(self) -> tuple[int, ...]:
        return tuple(range(self.root_id + 1, self.root_id + 1 + len(self.parent_vector)))

    @property
    def n_splitters(self) -> int:
        return len(self.parent_vector)

    @cached_property
    def parent(self) -> dict[int, int]:
        return dict(zip(self.splitter_ids, self.parent_vector))

    @cached_property
    def children(self) -> dict[int, tuple[int, ...]]:
        kids: dict[int, list[int]] = {self.root_id: []}
        kids.update({s: [] for s in self.splitter_ids})
        for s, p in self.parent.items():
            kids[p].append(s)
        return {k: tuple(v) for k, v in kids.items()}

    @cached_property
    def postorder(self) -> tuple[int, ...]:
        """Splitters ordered children-first, followed by the root."""
        order: list[int] = []

        def visit(node):
            for c in self.children[node]:
                visit(c)
            order.append(node)

        visit(self.root_id)
        return tuple(order)

    @property
    def edges(self) -> tuple[InternalEdge, ...]:
        return tuple(InternalEdge(p, s) for s, p in zip(self.splitter_ids, self.parent_vector))

    def has_edge(self, edge: InternalEdge) -> bool:
        return self.parent.get(edge.child_id) == edge.parent_id

    def subtree(self, node: int) -> frozenset[int]:
        """Splitters in the subtree rooted at ``node`` (inclusive when ``node`` is a splitter)."""
        out = set()
        stack = [node]
        while stack:
            n = stack.pop()
            if n != self.root_id:
                out.add(n)
            stack.extend(self.children[n])
        return frozenset(out)

    def to_dict(self) -> dict:
        return {"root": self.root_id, "parents": {str(s): p for s, p in self.parent.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        root = int(d.get("root", ROOT_ID))
        parents = {int(k): int(v) for k, v in d["parents"].items()}
        expected = list(range(root + 1, root + 1 + len(parents)))
        if sorted(parents) != expected:
            raise ValueError(f"splitter ids must be {expected}, got {sorted(parents)}")
        return cls(tuple(parents[s] for s in expected), root_id=root)


@dataclass(frozen=True)
class NetworkInstance:
    """A topology plus the splitter each modem hangs from."""

    topology: Topology
    modem_parent: tuple[int, ...]

    def __post_init__(self):
        splitters = set(self.topology.splitter_ids)
        for m, s in enumerate(self.modem_parent):
            if s not in splitters:
                raise ValueError(f"modem {m} attached to non-splitter {s}")
        empty = splitters.difference(self.modem_parent)
        if empty:
            raise ValueError(f"splitters without modems: {sorted(empty)}")

    @property
    def M(self) -> int:
        return len(self.modem_parent)

    @cached_property
    def modems_of(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {s: [] for s in self.topology.splitter_ids}
        for m, s in enumerate(self.modem_parent):
            out[s].append(m)
        return {s: tuple(v) for s, v in out.items()}

    def with_topology(self, topology: Topology) -> "NetworkInstance":
        """Same modem wiring on a different splitter tree (used for negative topologies)."""
        return NetworkInstance(topology, self.modem_parent)


def enumerate_topologies(num_internal_total: int) -> list[Topology]:
    """All rooted labeled trees on ``num_internal_total`` nodes with node 0 as root.

    Ordered lexicographically by parent vector, so list index is a stable topology id.
    """
    n = num_internal_total
    if not isinstance(n, (int, np.integer)) or not 2 <= n <= MAX_ENUMERATION_NODES:
        raise ValueError(f"num_internal_total must be in [2, {MAX_ENUMERATION_NODES}], got {n!r}")
    splitters = range(1, n)
    out = []
    for pv in itertools.product(range(n), repeat=n - 1):
        if any(p == s for s, p in zip(splitters, pv)):
            continue
        if _is_acyclic(pv):
            out.append(Topology(tuple(pv)))
    return out


def _is_acyclic(pv: Sequence[int]) -> bool:
    for start in range(1, len(pv) + 1):
        node, steps = start, 0
        while node != ROOT_ID:
            node = pv[node - 1]
            steps += 1
            if steps > len(pv):
                return False
    return True


def affected_modems(instance: NetworkInstance, edge: InternalEdge) -> frozenset[int]:
    """Modems attached anywhere in the subtree below ``edge``."""
    if not instance.topology.has_edge(edge):
        raise ValueError(f"edge {tuple(edge)} is not in the topology")
    below = instance.topology.subtree(edge.child_id)
    return frozenset(m for m, s in enumerate(instance.modem_parent) if s in below)


def sample_topology(rng: np.random.Generator, candidates: Sequence[Topology]) -> Topology:
    if len(candidates) == 0:
        raise ValueError("no candidate topologies to sample from")
    return candidates[int(rng.integers(len(candidates)))]


def topology_index(candidates: Sequence[Topology], topology: Topology) -> int:
    for i, g in enumerate(candidates):
        if g == topology:
            return i
    raise ValueError("topology not among candidates")
