import dataclasses

import numpy as np
import pytest

from contrastive_parsimony.simulator import (Observation, SimConfig, ar2_filter,
                                             ar2_stationary_variance, distribute_modems,
                                             generate_ar2, generate_dataset, inject_events,
                                             iter_observations, load_observations, observation_rng,
                                             simulate_observation, split_sizes, write_observations)
from contrastive_parsimony.topology import InternalEdge, affected_modems, enumerate_topologies

from conftest import CHAIN, STAR, instance_with_counts

SMALL = SimConfig(n_observations=6, series_len=60, n_chunks=6, modem_range=(5, 9), seed=11)


def yule_walker_variance(phi1, phi2, sigma2):
    """Solve the Yule-Walker system for gamma0 directly (independent of the closed form)."""
    # gamma0 = phi1 g1 + phi2 g2 + s2 ; g1 = phi1 g0 + phi2 g1 ; g2 = phi1 g1 + phi2 g0
    A = np.array([[1.0, -phi1, -phi2],
                  [-phi1, 1.0 - phi2, 0.0],
                  [-phi2, -phi1, 1.0]])
    return np.linalg.solve(A, [sigma2, 0.0, 0.0])[0]


def test_zero_innovations_give_zero_series():
    x = generate_ar2(50, np.zeros(50), 0.0, 0.6, -0.5, np.random.default_rng(0))
    assert np.array_equal(x, np.zeros(50))


def test_hand_recursion():
    x = ar2_filter(np.array([0.0, 0.0, 1.0, 0.0, 0.0]), 0.6, -0.5)
    assert np.allclose(x, [0, 0, 1, 0.6, -0.14], atol=1e-15)


def test_initial_values_zero():
    x = generate_ar2(10, np.full(10, 3.0), 0.5, 0.6, -0.5, np.random.default_rng(1))
    assert x[0] == 0.0 and x[1] == 0.0


def test_short_series_rejected():
    with pytest.raises(ValueError):
        generate_ar2(1, np.zeros(1), 0.5, 0.6, -0.5, np.random.default_rng(0))


def test_stationary_variance_formula():
    assert ar2_stationary_variance(0.5, 0.6, -0.5) == pytest.approx(yule_walker_variance(0.6, -0.5, 0.25))
    assert ar2_stationary_variance(0.5, 0.6, -0.5) == pytest.approx(0.3968, abs=1e-4)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(series_len=1000, n_chunks=30)
    with pytest.raises(ValueError):
        SimConfig(modem_range=(2, 10))
    with pytest.raises(ValueError):
        SimConfig(noise_std=0.0)


def test_distribute_never_leaves_a_splitter_empty():
    rng = np.random.default_rng(0)
    for M in (3, 4, 10):
        for _ in range(50):
            draw = distribute_modems(M, (1, 2, 3), rng)
            assert set(draw) == {1, 2, 3} and len(draw) == M


def test_no_chunks_means_no_events():
    cfg = dataclasses.replace(SMALL, n_chunks=0)
    inst = instance_with_counts(STAR, [2, 2, 2])
    mu, truth, log = inject_events(inst, cfg, np.random.default_rng(0))
    assert not mu.any() and not truth.any() and log == []


class FirstEdgeRng:
    """Stand-in generator whose integer draws always pick index ``k``."""

    def __init__(self, k):
        self.k = k

    def integers(self, n):
        return self.k


def test_star_first_edge_shifts_one_splitter():
    cfg = SimConfig(n_observations=1, series_len=20, n_chunks=4, modem_range=(3, 9))
    inst = instance_with_counts(STAR, [2, 3, 1])
    mu, truth, log = inject_events(inst, cfg, FirstEdgeRng(0))
    assert log[0] == (0, InternalEdge(0, 1))
    assert (mu[:2, :5] == 3.0).all()
    assert (mu[2:, :] == 0.0).all()


def test_chain_middle_edge_shifts_below():
    cfg = SimConfig(n_observations=1, series_len=20, n_chunks=4, modem_range=(3, 9))
    inst = instance_with_counts(CHAIN, [2, 3, 1])
    mu, truth, log = inject_events(inst, cfg, FirstEdgeRng(1))
    assert all(e == InternalEdge(1, 2) for _, e in log)
    assert (mu[2:] == 3.0).all() and (mu[:2] == 0.0).all()


def test_observation_invariants():
    tops = enumerate_topologies(4)
    for obs in iter_observations(SMALL, candidates=tops):
        assert obs.series.shape == obs.truth_events.shape == (obs.M, SMALL.series_len)
        assert len(obs.event_log) == SMALL.n_chunks
        assert tops[obs.topology_id] == obs.instance.topology
        expect = np.zeros_like(obs.truth_events)
        tau = SMALL.chunk_size
        for chunk, edge in obs.event_log:
            expect[sorted(affected_modems(obs.instance, edge)), chunk * tau:(chunk + 1) * tau] = 1
        assert np.array_equal(expect, obs.truth_events)
        assert SMALL.modem_range[0] <= obs.M <= SMALL.modem_range[1]


def test_same_seed_same_observation():
    tops = enumerate_topologies(4)
    a = simulate_observation(SMALL, tops, observation_rng(5, 3), obs_id=3)
    b = simulate_observation(SMALL, tops, observation_rng(5, 3), obs_id=3)
    assert a.to_dict() == b.to_dict()


def test_fixed_modem_count():
    cfg = dataclasses.replace(SMALL, modem_range=(50, 50), n_observations=5)
    assert all(o.M == 50 for o in iter_observations(cfg))


def test_mean_modem_count():
    cfg = SimConfig(n_observations=1000, series_len=2, n_chunks=1, seed=3)
    Ms = np.array([o.M for o in iter_observations(cfg)])
    # uniform on 50..100: sd 14.7, standard error 0.47 over 1000 draws
    assert 73 <= Ms.mean() <= 77


def test_event_shift_zero_keeps_noise():
    tops = enumerate_topologies(4)
    quiet = dataclasses.replace(SMALL, event_shift=0.0)
    a = simulate_observation(SMALL, tops, observation_rng(1, 0))
    b = simulate_observation(quiet, tops, observation_rng(1, 0))
    assert a.instance == b.instance
    # with shift 0 the series is the event-free AR(2) driven by the same noise draws
    mu, _, _ = inject_events(a.instance, SMALL, observation_rng(1, 0).spawn(2)[0])
    assert np.allclose(a.series - b.series, ar2_filter(mu, 0.6, -0.5))


@pytest.mark.parametrize("n,split,expected", [(1000, 0.5, (500, 500)), (2, 0.5, (1, 1)),
                                              (10, 0.5, (5, 5)), (10, 0.7, (3, 7))])
def test_split_sizes(n, split, expected):
    assert split_sizes(n, split) == expected


def test_bad_split():
    with pytest.raises(ValueError):
        split_sizes(10, 1.0)


def test_round_trip(tmp_path):
    obs = list(iter_observations(SMALL))
    path = tmp_path / "obs.jsonl"
    assert write_observations(path, obs) == len(obs)
    back = load_observations(path)
    for a, b in zip(obs, back):
        assert a.to_dict() == b.to_dict()
        assert np.array_equal(a.series, b.series)


def test_generate_dataset_files(tmp_path):
    cfg = dataclasses.replace(SMALL, n_observations=2)
    n_train, n_test = generate_dataset(cfg, 0.5, tmp_path / "tr.jsonl", tmp_path / "te.jsonl")
    assert (n_train, n_test) == (1, 1)
    assert [o.id for o in load_observations(tmp_path / "te.jsonl")] == [1]


def test_unreadable_path_has_context(tmp_path):
    with pytest.raises(OSError, match="missing.jsonl"):
        load_observations(tmp_path / "missing.jsonl")


def test_observation_from_dict_validates():
    d = next(iter_observations(SMALL)).to_dict()
    d["modem_parent"][0] = 0
    with pytest.raises(ValueError):
        Observation.from_dict(d)
