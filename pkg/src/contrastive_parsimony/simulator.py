"""Simulated leaf time series on tree networks with chunked edge events."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.signal import lfilter

from .topology import (InternalEdge, NetworkInstance, Topology, affected_modems,
                       enumerate_topologies, sample_topology, topology_index)


@dataclass(frozen=True)
class SimConfig:
    n_observations: int = 1000
    series_len: int = 4000
    n_chunks: int = 40
    modem_range: tuple[int, int] = (50, 100)
    event_shift: float = 3.0
    noise_std: float = 0.5
    ar_coeffs: tuple[float, float] = (0.6, -0.5)
    num_internal_total: int = 4
    seed: int = 0

    def __post_init__(self):
        n_splitters = self.num_internal_total - 1
        lo, hi = self.modem_range
        if self.series_len < 2:
            raise ValueError("series_len must be at least 2")
        if self.n_chunks < 0 or (self.n_chunks and self.series_len % self.n_chunks):
            raise ValueError(f"series_len {self.series_len} not divisible by n_chunks {self.n_chunks}")
        if lo < n_splitters or hi < lo:
            raise ValueError(f"modem_range {self.modem_range} must satisfy {n_splitters} <= lo <= hi")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        if self.n_observations < 1:
            raise ValueError("n_observations must be positive")

    @property
    def chunk_size(self) -> int:
        return self.series_len // self.n_chunks if self.n_chunks else self.series_len


@dataclass
class Observation:
    id: int
    topology_id: int
    instance: NetworkInstance
    series: np.ndarray
    truth_events: np.ndarray
    event_log: list[tuple[int, InternalEdge]] = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.instance.M

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "topology_id": self.topology_id,
            "parents": self.instance.topology.to_dict()["parents"],
            "modem_parent": list(self.instance.modem_parent),
            "series": self.series.tolist(),
            "truth_events": self.truth_events.tolist(),
            "event_log": [[c, e.parent_id, e.child_id] for c, e in self.event_log],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observation":
        topo = Topology.from_dict({"parents": d["parents"]})
        instance = NetworkInstance(topo, tuple(int(s) for s in d["modem_parent"]))
        return cls(
            id=int(d["id"]),
            topology_id=int(d["topology_id"]),
            instance=instance,
            series=np.asarray(d["series"], dtype=np.float64),
            truth_events=np.asarray(d["truth_events"], dtype=np.uint8),
            event_log=[(int(c), InternalEdge(int(p), int(s))) for c, p, s in d["event_log"]],
        )


def ar2_filter(innovations: np.ndarray, phi1: float, phi2: float) -> np.ndarray:
    """Run x_t = phi1 x_{t-1} + phi2 x_{t-2} + e_t along the last axis with x_0 = x_1 = 0."""
    e = np.array(innovations, dtype=np.float64, copy=True)
    e[..., :2] = 0.0
    return lfilter([1.0], [1.0, -phi1, -phi2], e, axis=-1)


def generate_ar2(length: int, mu, noise_std: float, phi1: float, phi2: float,
                 rng: np.random.Generator) -> np.ndarray:
    if length < 2:
        raise ValueError("AR(2) series needs length >= 2")
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (length,))
    eps = mu + noise_std * rng.standard_normal(length)
    return ar2_filter(eps, phi1, phi2)


def ar2_stationary_variance(noise_std: float, phi1: float, phi2: float) -> float:
    """Long-run variance of a zero-mean stationary AR(2) (Yule-Walker)."""
    return noise_std**2 * (1 - phi2) / ((1 + phi2) * ((1 - phi2) ** 2 - phi1**2))


def distribute_modems(M: int, splitter_ids: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform independent splitter per modem, redrawn until no splitter is empty."""
    if M < len(splitter_ids):
        raise ValueError(f"cannot give {len(splitter_ids)} splitters a modem each with M={M}")
    ids = np.asarray(splitter_ids)
    while True:
        draw = ids[rng.integers(len(ids), size=M)]
        if len(np.unique(draw)) == len(ids):
            return tuple(int(s) for s in draw)


def inject_events(instance: NetworkInstance, config: SimConfig, rng: np.random.Generator):
    """Mean-shift matrix, event indicator matrix and event log for one observation."""
    M, t = instance.M, config.series_len
    mu = np.zeros((M, t))
    truth = np.zeros((M, t), dtype=np.uint8)
    log: list[tuple[int, InternalEdge]] = []
    edges = instance.topology.edges
    tau = config.chunk_size
    for chunk in range(config.n_chunks):
        edge = edges[int(rng.integers(len(edges)))]
        rows = sorted(affected_modems(instance, edge))
        cols = slice(chunk * tau, (chunk + 1) * tau)
        mu[rows, cols] = config.event_shift
        truth[rows, cols] = 1
        log.append((chunk, edge))
    return mu, truth, log


def observation_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def simulate_observation(config: SimConfig, candidates: Sequence[Topology],
                         rng: np.random.Generator, obs_id: int = 0) -> Observation:
    # events and noise get their own substreams so toggling one never shifts the other
    event_rng, noise_rng = rng.spawn(2)
    topo = sample_topology(rng, candidates)
    lo, hi = config.modem_range
    M = int(rng.integers(lo, hi + 1))
    instance = NetworkInstance(topo, distribute_modems(M, topo.splitter_ids, rng))
    mu, truth, log = inject_events(instance, config, event_rng)
    phi1, phi2 = config.ar_coeffs
    eps = mu + config.noise_std * noise_rng.standard_normal((M, config.series_len))
    series = ar2_filter(eps, phi1, phi2)
    return Observation(obs_id, topology_index(candidates, topo), instance, series, truth, log)


def iter_observations(config: SimConfig, start: int = 0, stop: int | None = None,
                      candidates: Sequence[Topology] | None = None) -> Iterator[Observation]:
    if candidates is None:
        candidates = enumerate_topologies(config.num_internal_total)
    stop = config.n_observations if stop is None else stop
    for i in range(start, stop):
        yield simulate_observation(config, candidates, observation_rng(config.seed, i), obs_id=i)


def simulate_dataset(config: SimConfig) -> list[Observation]:
    return list(iter_observations(config))


def split_sizes(n: int, split_fraction: float) -> tuple[int, int]:
    """(train, test) counts; the test share is ``split_fraction``."""
    if not 0 < split_fraction < 1:
        raise ValueError(f"split_fraction must be in (0, 1), got {split_fraction}")
    n_train = math.ceil(round(n * (1 - split_fraction), 9))
    return n_train, n - n_train


def write_observations(path, observations: Iterable[Observation]) -> int:
    """Write JSON-Lines atomically; returns the number of lines written."""
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    count = 0
    try:
        with open(tmp, "w") as fh:
            for obs in observations:
                fh.write(json.dumps(obs.to_dict()))
                fh.write("\n")
                count += 1
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise OSError(f"failed writing dataset file {path}: {exc}") from exc
    return count


def load_observations(path) -> list[Observation]:
    path = Path(path)
    try:
        with open(path) as fh:
            return [Observation.from_dict(json.loads(line)) for line in fh if line.strip()]
    except OSError as exc:
        raise OSError(f"failed reading dataset file {path}: {exc}") from exc


def generate_dataset(config: SimConfig, split_fraction: float, train_path, test_path) -> tuple[int, int]:
    """Simulate ``config.n_observations`` and stream them into train/test JSON-Lines files."""
    n_train, n_test = split_sizes(config.n_observations, split_fraction)
    candidates = enumerate_topologies(config.num_internal_total)
    a = write_observations(train_path, iter_observations(config, 0, n_train, candidates))
    b = write_observations(test_path, iter_observations(config, n_train, config.n_observations, candidates))
    return a, b
