"""Top-k topology recovery and event accuracy of a trained encoder."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import EncoderConfig, EncoderParams, encode
from .parsimony import binarize, parsimony_vectors
from .simulator import Observation
from .topology import Topology, topology_index
from .trainer import prepare_inputs

TOP_K = (1, 2, 3)


@dataclass
class ObservationResult:
    obs_id: int
    topology_id: int
    rank: int
    n_tied: int  # other topologies with exactly the true topology's score
    scores: list[int]
    accuracy: float
    polarity_accuracy: float


@dataclass
class EvalReport:
    top_k_fraction: dict[int, float]
    event_accuracy_mean: float
    event_accuracy_std: float
    event_accuracy_polarity_optimal_mean: float
    tie_rate: float
    strict_top1: float
    details: list[ObservationResult] = field(default_factory=list)

    def to_dict(self, details: bool = False) -> dict:
        out = {f"top{k}": v for k, v in self.top_k_fraction.items()}
        out.update(acc_mean=self.event_accuracy_mean, acc_std=self.event_accuracy_std,
                   acc_polarity_mean=self.event_accuracy_polarity_optimal_mean,
                   tie_rate=self.tie_rate, strict_top1=self.strict_top1, n=len(self.details))
        if details:
            out["details"] = [vars(d) for d in self.details]
        return out

    def to_json(self, details: bool = False) -> str:
        return json.dumps(self.to_dict(details), indent=2)

    def table(self) -> str:
        ks = sorted(self.top_k_fraction)
        head = "  ".join(f"Top-{k:<3d}" for k in ks)
        vals = "  ".join(f"{self.top_k_fraction[k]:<7.3f}" for k in ks)
        return "\n".join([
            head, vals, "",
            "Acc mean  Acc std  Polarity-opt mean",
            f"{self.event_accuracy_mean:<8.3f}  {self.event_accuracy_std:<7.4f}  "
            f"{self.event_accuracy_polarity_optimal_mean:.3f}",
            "",
            f"tie rate {self.tie_rate:.3f}   strict top-1 (ties counted against) {self.strict_top1:.3f}",
        ])


def predict_events(observation: Observation, params: EncoderParams, encoder_config: EncoderConfig,
                   standardize_inputs: bool = False) -> np.ndarray:
    x = prepare_inputs(observation.series, standardize_inputs)
    return binarize(encode(x, params, encoder_config))


def topology_scores(observation: Observation, X, all_topologies: Sequence[Topology]) -> np.ndarray:
    """Total hard parsimony of ``X`` under every candidate topology."""
    return parsimony_vectors(observation.instance, all_topologies, X).sum(axis=1)


def rank_from_scores(scores: np.ndarray, true_index: int) -> tuple[int, int]:
    """(1 + number strictly better, number of others tied with the true topology)."""
    s = scores[true_index]
    better = int((scores < s).sum())
    tied = int((scores == s).sum()) - 1
    return 1 + better, tied


def rank_of_events(observation: Observation, X, all_topologies: Sequence[Topology]) -> int:
    scores = topology_scores(observation, X, all_topologies)
    return rank_from_scores(scores, topology_index(all_topologies, observation.instance.topology))[0]


def rank_true_topology(observation: Observation, params: EncoderParams, encoder_config: EncoderConfig,
                       all_topologies: Sequence[Topology], standardize_inputs: bool = False) -> int:
    X = predict_events(observation, params, encoder_config, standardize_inputs)
    return rank_of_events(observation, X, all_topologies)


def accuracy_of_events(observation: Observation, X) -> tuple[float, float]:
    raw = float((np.asarray(X) == observation.truth_events).mean())
    return raw, max(raw, 1.0 - raw)


def event_accuracy(observation: Observation, params: EncoderParams, encoder_config: EncoderConfig,
                   standardize_inputs: bool = False) -> tuple[float, float]:
    X = predict_events(observation, params, encoder_config, standardize_inputs)
    return accuracy_of_events(observation, X)


def evaluate_events(test_set: Sequence[Observation], event_matrices: Sequence[np.ndarray],
                    all_topologies: Sequence[Topology]) -> EvalReport:
    """Aggregate ranks and accuracies for already-binarized encodings, one per observation."""
    if len(test_set) == 0:
        raise ValueError("empty test set")
    details = []
    for obs, X in zip(test_set, event_matrices):
        scores = topology_scores(obs, X, all_topologies)
        true_index = topology_index(all_topologies, obs.instance.topology)
        rank, tied = rank_from_scores(scores, true_index)
        raw, pol = accuracy_of_events(obs, X)
        details.append(ObservationResult(obs.id, true_index, rank, tied, scores.tolist(), raw, pol))
    ranks = np.array([d.rank for d in details])
    acc = np.array([d.accuracy for d in details])
    top = {k: float((ranks <= k).mean()) for k in TOP_K}
    return EvalReport(
        top_k_fraction=top,
        event_accuracy_mean=float(acc.mean()),
        event_accuracy_std=float(acc.std()),
        event_accuracy_polarity_optimal_mean=float(np.mean([d.polarity_accuracy for d in details])),
        tie_rate=float(np.mean([d.n_tied > 0 for d in details])),
        strict_top1=float(np.mean([d.rank == 1 and d.n_tied == 0 for d in details])),
        details=details,
    )


def evaluate(test_set: Sequence[Observation], params: EncoderParams, all_topologies: Sequence[Topology],
             encoder_config: EncoderConfig, standardize_inputs: bool = False) -> EvalReport:
    X = [predict_events(o, params, encoder_config, standardize_inputs) for o in test_set]
    return evaluate_events(test_set, X, all_topologies)


def evaluate_oracle(test_set: Sequence[Observation], all_topologies: Sequence[Topology]) -> EvalReport:
    """Ground-truth encoder: X is each observation's true event indicator matrix."""
    return evaluate_events(test_set, [o.truth_events for o in test_set], all_topologies)
