import math

import numpy as np
import pytest

from rankbreak.errors import ConfigError
from rankbreak.model import Theta
from rankbreak.poset import OrderedPartition
from rankbreak.synth import (
    ScenarioConfig,
    generate_canonical,
    generate_tradeoff,
    sample_theta,
    slice_ranking,
    theta_rng,
    tradeoff_blocks,
)


class TestSlicing:
    def test_blocks_from_ranking(self):
        part = slice_ranking([4, 0, 2, 5, 1, 3], (1, 2))
        assert part == OrderedPartition.from_top_down([{4}, {0, 2}, {5, 1, 3}])

    def test_edge_shapes(self):
        data = generate_canonical(ScenarioConfig(d=10, n=5, block_sizes=(1, 2, 3), seed=1)).dataset
        for obs in data.observations:
            assert [(e.m, e.r) for e in obs.edges] == [(1, 10), (2, 9), (3, 7)]


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"block_sizes": (3, 3)},
        {"block_sizes": (2, 2), "kappa": 4},
        {"block_sizes": (0, 1)},
        {"kappa": 9},
        {"n": 0},
        {"b": 0.0},
    ])
    def test_rejects(self, kwargs):
        base = {"d": 6, "n": 10, "block_sizes": (1, 2)}
        with pytest.raises(ConfigError):
            ScenarioConfig(**{**base, **kwargs})

    def test_theta_dimension(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(d=6, n=1, block_sizes=(1,), theta_star=Theta(np.zeros(5), 1))


class TestGenerator:
    def test_reproducible(self):
        cfg = ScenarioConfig(d=12, n=50, block_sizes=(1, 2), kappa=6, seed=42)
        a, b = generate_canonical(cfg), generate_canonical(cfg)
        assert a.dataset.observations == b.dataset.observations
        np.testing.assert_array_equal(a.theta_star.values, b.theta_star.values)

    def test_prefix_stable_in_n(self):
        # per-user streams: growing n keeps earlier users unchanged
        small = generate_canonical(ScenarioConfig(d=8, n=20, block_sizes=(2,), kappa=5, seed=3))
        large = generate_canonical(ScenarioConfig(d=8, n=60, block_sizes=(2,), kappa=5, seed=3))
        assert large.dataset.observations[:20] == small.dataset.observations

    def test_seeds_differ(self):
        a = generate_canonical(ScenarioConfig(d=8, n=20, block_sizes=(2,), seed=1))
        b = generate_canonical(ScenarioConfig(d=8, n=20, block_sizes=(2,), seed=2))
        assert a.dataset.observations != b.dataset.observations

    def test_theta_in_omega(self):
        for seed in range(10):
            theta = sample_theta(20, 2.0, theta_rng(seed))
            assert abs(theta.values.sum()) <= 1e-9
            assert np.all(np.abs(theta.values) <= 2.0 + 1e-12)

    def test_offer_sets_sized(self):
        data = generate_canonical(ScenarioConfig(d=15, n=200, block_sizes=(1, 1), kappa=4, seed=8)).dataset
        assert set(data.kappa.tolist()) == {4}
        # every item is offered at some point
        seen = set().union(*(o.offer_set for o in data.observations))
        assert seen == set(range(15))

    def test_top_one_frequencies(self):
        theta = Theta(np.array([math.log(4), math.log(2), 0.0, -math.log(8)]) - 0.0, 3)
        n = 40_000
        data = generate_canonical(ScenarioConfig(d=4, n=n, block_sizes=(1,), seed=7, theta_star=theta)).dataset
        winners = np.bincount([next(iter(o.partition.blocks[-1])) for o in data.observations], minlength=4)
        w = np.exp(theta.values)
        p = w / w.sum()
        se = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(winners / n - p) <= 4 * se)

    def test_keep_top_orderings(self):
        data = generate_canonical(ScenarioConfig(d=8, n=30, block_sizes=(2, 3), seed=4, keep_top_orderings=True))
        assert len(data.top_orders) == 30
        for order, obs in zip(data.top_orders, data.dataset.observations):
            top_down = obs.partition.blocks[::-1]
            assert set(order[:2]) == top_down[0]
            assert set(order[2:5]) == top_down[1]
        assert generate_canonical(ScenarioConfig(d=8, n=3, block_sizes=(2,))).top_orders is None


class TestTradeoff:
    def test_blocks_at_256(self):
        assert tradeoff_blocks(256) == (1, 2, 3)

    def test_effective_size_per_user(self):
        data = generate_tradeoff(256, 10, seed=1).dataset
        for M in (1, 2, 3):
            np.testing.assert_array_equal(data.with_M(M).p, M * (M + 1) // 2)

    def test_constraints_enforced(self):
        with pytest.raises(ConfigError):
            tradeoff_blocks(4, c=0.1)
        for d in (64, 256, 1024, 4096):
            blocks = tradeoff_blocks(d)
            assert sum(blocks) <= 0.5 * math.sqrt(d)
