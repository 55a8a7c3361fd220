import math

import numpy as np
import pytest

from rankbreak.errors import ConfigError, DataError, EmptyLikelihoodError
from rankbreak.estimator import (
    FitOptions,
    consistent_orders,
    fit_order_M,
    full_mle_small,
    full_poset_log_likelihood,
    implied_pairs,
    oracle_dataset,
    oracle_mle,
    pairwise_rb_inconsistent,
    refine_observation,
    squared_error,
)
from rankbreak.likelihood import Dataset, total_log_likelihood
from rankbreak.model import Ranking, Theta, ranking_probability
from rankbreak.poset import Observation, OrderedPartition
from rankbreak.synth import ScenarioConfig, generate_canonical

from conftest import random_theta


def pairwise(winner, loser):
    return Observation.from_top_down([{winner}, {loser}])


def two_item_data():
    return Dataset(2, [pairwise(0, 1)] * 30 + [pairwise(1, 0)] * 10)


class TestFitOrderM:
    def test_two_item_win_ratio(self):
        res = fit_order_M(two_item_data(), FitOptions(b=5))
        assert res.converged
        np.testing.assert_allclose(res.theta_hat.values, [math.log(3) / 2, -math.log(3) / 2], atol=1e-4)

    def test_monotone_ascent(self, rng):
        data = generate_canonical(ScenarioConfig(d=8, n=200, block_sizes=(1, 2), seed=4)).dataset
        res = fit_order_M(data, FitOptions(b=2))
        assert np.all(np.diff(res.history) >= 0)
        assert res.converged and res.grad_norm <= res.tolerance

    def test_optimality_certificate_with_active_box(self, rng):
        # item 0 always wins, so the box constraint binds
        obs = [Observation.from_top_down([{0}, {1, 2, 3}]) for _ in range(40)]
        obs += [Observation.from_top_down([{1}, {2}, {3}]) for _ in range(10)]
        obs += [Observation.from_top_down([{3}, {2, 1}]) for _ in range(7)]
        ds = Dataset(4, obs)
        opts = FitOptions(b=1.0)
        res = fit_order_M(ds, opts)
        assert res.converged
        theta = res.theta_hat.values
        assert theta[0] == pytest.approx(1.0)
        grad = total_log_likelihood(theta, ds).gradient
        at_upper, at_lower = np.isclose(theta, 1.0), np.isclose(theta, -1.0)
        checked = 0
        while checked < 100:
            u = rng.standard_normal(4)
            u[at_upper] = -np.abs(u[at_upper])
            u[at_lower] = np.abs(u[at_lower])
            u -= u.mean()
            if np.any(u[at_upper] > 0) or np.any(u[at_lower] < 0):
                continue
            u /= np.linalg.norm(u)
            assert grad @ u <= res.tolerance
            checked += 1

    def test_symmetric_truth_error_shrinks(self):
        medians = []
        for n in (50, 200, 800):
            errs = []
            for trial in range(20):
                data = generate_canonical(ScenarioConfig(
                    d=6, n=n, block_sizes=(1, 2), seed=1000 * trial + n, theta_star=Theta(np.zeros(6), 2)))
                errs.append(squared_error(fit_order_M(data.dataset, FitOptions(b=2)), np.zeros(6)))
            medians.append(np.median(errs))
        assert medians[0] > medians[1] > medians[2]

    def test_deterministic(self):
        data = generate_canonical(ScenarioConfig(d=8, n=300, block_sizes=(1, 2, 3), seed=9)).dataset
        a = fit_order_M(data.with_M(3), FitOptions(b=2))
        b = fit_order_M(data.with_M(3), FitOptions(b=2))
        np.testing.assert_array_equal(a.theta_hat.values, b.theta_hat.values)

    def test_disconnected_warns(self):
        ds = Dataset(4, [pairwise(0, 1)] * 3 + [pairwise(1, 0)] + [pairwise(2, 3)] * 2 + [pairwise(3, 2)])
        with pytest.warns(RuntimeWarning, match="disconnected"):
            res = fit_order_M(ds, FitOptions(b=3))
        assert not res.connected
        assert np.all(np.abs(res.theta_hat.values) <= 3 + 1e-12)

    def test_no_retained_edges(self):
        ds = Dataset(4, [Observation.from_top_down([{0, 1}, {2, 3}])], M=1)
        with pytest.raises(EmptyLikelihoodError):
            fit_order_M(ds)

    @pytest.mark.parametrize("kwargs", [{"grad_tol": 0}, {"max_iters": 0}, {"shrink": 1.0}, {"b": 0}])
    def test_option_validation(self, kwargs):
        with pytest.raises(ConfigError):
            FitOptions(**kwargs)


class TestFullMLE:
    def test_consistent_orders_count(self):
        assert len(consistent_orders((1, 2, 3))) == 1 * 2 * 6
        assert sorted(map(tuple, consistent_orders((2, 1)))) == [(0, 1, 2), (1, 0, 2)]

    def test_single_full_ranking_objective(self, rng):
        theta = random_theta(rng, 3).values
        obs = Observation.from_top_down([{2}, {0}, {1}])
        res = full_poset_log_likelihood(theta, [obs], 3)
        assert res.value == pytest.approx(ranking_probability(theta, Ranking.from_order((2, 0, 1))), abs=1e-14)

    def test_two_consistent_rankings_at_zero(self):
        obs = Observation(OrderedPartition(({3}, {1, 2})))
        assert full_poset_log_likelihood(np.zeros(4), [obs], 4).value == pytest.approx(math.log(1 / 3), abs=1e-14)

    def test_gradient_matches_finite_differences(self, rng):
        obs = [Observation.from_top_down([{0, 3}, {1}, {2, 4}]), Observation.from_top_down([{4}, {0, 1, 2}])]
        theta = random_theta(rng, 5).values
        g = full_poset_log_likelihood(theta, obs, 5).gradient
        h = 1e-5
        fd = [(full_poset_log_likelihood(theta + h * e, obs, 5).value
               - full_poset_log_likelihood(theta - h * e, obs, 5).value) / (2 * h) for e in np.eye(5)]
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)

    def test_agrees_with_order_M(self):
        data = generate_canonical(ScenarioConfig(d=5, n=200, block_sizes=(1, 2), seed=17)).dataset
        grb = fit_order_M(data.with_M(2), FitOptions(b=3))
        mle = full_mle_small(data, FitOptions(b=3))
        np.testing.assert_allclose(grb.theta_hat.values, mle.theta_hat.values, atol=1e-4)

    def test_kappa_cap(self):
        obs = Observation.from_top_down([{0}, set(range(1, 9))])
        with pytest.raises(ConfigError):
            full_mle_small(Dataset(9, [obs]))


class TestPairwise:
    def test_six_item_pair_count(self):
        obs = Observation(OrderedPartition(({6}, {5, 4, 3}, {2, 1})))
        wins = implied_pairs(Dataset(7, [obs]))
        # cross-block pairs only: 3 beat item 6, and 2 x 4 from the top block
        assert wins.sum() == 11
        assert wins[5, 3] == 0  # intra-block relation dropped by the partition

    def test_single_pairwise_matches_order_one(self):
        ds = two_item_data()
        a = pairwise_rb_inconsistent(ds, FitOptions(b=5))
        b = fit_order_M(ds.with_M(1), FitOptions(b=5))
        np.testing.assert_allclose(a.theta_hat.values, b.theta_hat.values, atol=1e-6)

    def test_bias_persists(self):
        theta = Theta(np.linspace(-2, 2, 8) - np.linspace(-2, 2, 8).mean(), 2)
        errs = {}
        for n in (2000, 8000):
            data = generate_canonical(ScenarioConfig(d=8, n=n, block_sizes=(1, 3, 3), seed=n, theta_star=theta)).dataset
            errs[n] = (squared_error(pairwise_rb_inconsistent(data, FitOptions(b=2)), theta),
                       squared_error(fit_order_M(data.with_M(3), FitOptions(b=2)), theta))
        prb, grb = errs[8000]
        assert prb > 2 * grb
        assert errs[8000][0] / errs[2000][0] > 0.5


class TestOracle:
    def test_singletons_identical_to_grb(self):
        data = generate_canonical(ScenarioConfig(d=6, n=100, block_sizes=(1, 1, 1), seed=3, keep_top_orderings=True))
        a = oracle_mle(data.dataset, data.top_orders, FitOptions(b=2))
        b = fit_order_M(data.dataset, FitOptions(b=2))
        np.testing.assert_allclose(a.theta_hat.values, b.theta_hat.values, atol=1e-12)

    def test_refinement_structure(self):
        bottom = {1, 4, 5, 7, 8}
        obs = Observation.from_top_down([{9, 2, 11}, {17, 3, 6}, bottom])
        refined = refine_observation(obs, [9, 2, 11, 17, 3, 6])
        assert refined.partition == OrderedPartition.from_top_down([{9}, {2}, {11}, {17}, {3}, {6}, bottom])
        assert all(e.m == 1 for e in refined.edges)

    def test_missing_refinement(self):
        data = generate_canonical(ScenarioConfig(d=6, n=10, block_sizes=(2,), seed=3))
        with pytest.raises(DataError):
            oracle_dataset(data.dataset, None)
        with pytest.raises(DataError):
            refine_observation(data.dataset.observations[0], [0])

    def test_contradicting_refinement(self):
        obs = Observation.from_top_down([{0}, {1, 2}, {3}])
        with pytest.raises(DataError):
            refine_observation(obs, [1, 0, 2])

    def test_oracle_not_worse_than_grb(self):
        oracle_err, grb_err = [], []
        for trial in range(20):
            data = generate_canonical(ScenarioConfig(d=10, n=300, block_sizes=(3, 3), seed=trial, keep_top_orderings=True))
            oracle_err.append(squared_error(oracle_mle(data.dataset, data.top_orders, FitOptions(b=2)), data.theta_star))
            grb_err.append(squared_error(fit_order_M(data.dataset, FitOptions(b=2)), data.theta_star))
        assert np.median(oracle_err) <= np.median(grb_err)
