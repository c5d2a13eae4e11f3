import numpy as np
import pytest
import torch

from contrastive_parsimony.topology import NetworkInstance, Topology, enumerate_topologies

STAR = Topology((0, 0, 0))
CHAIN = Topology((0, 1, 2))  # root -> 1 -> 2 -> 3

ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def topologies():
    return enumerate_topologies(4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def instance_with_counts(topology, counts):
    """Modems attached in blocks: ``counts[i]`` modems on splitter ``i + 1``."""
    parents = []
    for s, c in zip(topology.splitter_ids, counts):
        parents += [s] * c
    return NetworkInstance(topology, tuple(parents))


def random_instance(topology, rng, extra=5):
    parents = list(topology.splitter_ids) + list(rng.choice(topology.splitter_ids, size=extra))
    rng.shuffle(parents)
    return NetworkInstance(topology, tuple(int(p) for p in parents))


def central_diff(f, x: np.ndarray, index, h=1e-6) -> float:
    """Central difference of scalar ``f`` along one coordinate of ``x`` (float64, no autograd)."""
    xp = x.copy()
    xm = x.copy()
    xp[index] += h
    xm[index] -= h
    return (f(xp) - f(xm)) / (2 * h)


def rel_err(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def no_grad_scalar(fn):
    def wrapped(*args):
        with torch.no_grad():
            return float(fn(*args))
    return wrapped
