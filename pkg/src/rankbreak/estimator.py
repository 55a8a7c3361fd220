"""Projected gradient ascent over Omega_b and the estimators built on it."""

from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, DataError, EmptyLikelihoodError, NumericalError
from .likelihood import Dataset, GradientResult, total_log_likelihood
from .model import Theta, project_to_omega
from .poset import Observation

KAPPA_ENUM_CAP = 8

Objective = Callable[[np.ndarray], GradientResult]


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``grad_tol`` is multiplied by the effective sample size when
    ``scale_tol`` is set, so the same default works across dataset sizes.
    """

    b: float = 5.0
    max_iters: int = 5000
    grad_tol: float = 1e-7
    scale_tol: bool = True
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.grad_tol > 0:
            raise ConfigError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink factor must lie in (0, 1)")
        if not self.b > 0:
            raise ConfigError("box bound b must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class FitResult:
    theta_hat: Theta
    final_value: float
    iterations: int
    converged: bool
    grad_norm: float
    tolerance: float
    wall_time: float
    permutation_terms_evaluated: int
    connected: bool = True
    history: tuple[float, ...] = field(default=(), repr=False)


def gradient_mapping(values: np.ndarray, grad: np.ndarray, b: float) -> np.ndarray:
    """Projected-gradient step ``P(theta + grad) - theta``; zero at a maximizer."""
    return project_to_omega(values + grad, b).values - values


def maximize(objective: Objective, d: int, opts: FitOptions, scale: float = 1.0) -> FitResult:
    """Projected gradient ascent with Armijo backtracking.

    Trial steps follow the Barzilai-Borwein rule and are shrunk until the
    sufficient-increase condition holds, so accepted iterates never lose
    objective value.
    """
    start = time.perf_counter_ns()
    tol = opts.grad_tol * (max(scale, 1.0) if opts.scale_tol else 1.0)
    values = np.zeros(d)
    res = objective(values)
    terms = res.permutation_terms
    value, grad = res.value, res.gradient
    history = [value]
    step = opts.initial_step / max(1.0, float(np.linalg.norm(grad)))
    grad_norm = float(np.linalg.norm(gradient_mapping(values, grad, opts.b)))
    converged = grad_norm <= tol
    iters = 0
    while not converged and iters < opts.max_iters:
        iters += 1
        trial = step
        while True:
            cand = project_to_omega(values + trial * grad, opts.b).values
            move = cand - values
            new = objective(cand)
            terms += new.permutation_terms
            if new.value >= value + opts.armijo * float(grad @ move):
                break
            trial *= opts.shrink
            if trial < 1e-30:
                raise NumericalError("line search failed to find an ascent step")
        s, y = move, new.gradient - grad
        sy = float(s @ y)
        step = float(s @ s) / -sy if sy < 0 else trial / opts.shrink
        values, value, grad = cand, new.value, new.gradient
        history.append(value)
        if not np.isfinite(value):
            raise NumericalError("non-finite objective value")
        grad_norm = float(np.linalg.norm(gradient_mapping(values, grad, opts.b)))
        converged = grad_norm <= tol
    return FitResult(
        theta_hat=Theta(values, opts.b),
        final_value=value,
        iterations=iters,
        converged=converged,
        grad_norm=grad_norm,
        tolerance=tol,
        wall_time=(time.perf_counter_ns() - start) * 1e-9,
        permutation_terms_evaluated=terms,
        history=tuple(history),
    )


def _components(d: int, groups: Sequence[np.ndarray]) -> int:
    """Number of connected components when each group of items is a clique."""
    heads, tails = [], []
    for items in groups:
        items = np.atleast_2d(items)
        for k in range(1, items.shape[1]):
            heads.append(items[:, 0])
            tails.append(items[:, k])
    if not heads:
        return d
    heads, tails = np.concatenate(heads), np.concatenate(tails)
    graph = coo_matrix((np.ones(heads.size), (heads, tails)), shape=(d, d))
    return int(connected_components(graph, directed=False)[0])


def is_connected(dataset: Dataset) -> bool:
    """Whether the comparison graph of the retained edges spans all items."""
    groups = [np.concatenate([b.top, b.bottom], axis=1) for b in dataset.batches]
    return _components(dataset.d, groups) == 1


def _with_connectivity(result: FitResult, connected: bool) -> FitResult:
    if not connected:
        warnings.warn(
            "comparison graph is disconnected; the estimate is pinned down only by the box constraint",
            RuntimeWarning,
            stacklevel=3,
        )
    return replace(result, connected=connected)


def fit_order_M(dataset: Dataset, opts: FitOptions = FitOptions()) -> FitResult:
    """Order-M rank-breaking estimate: maximize the retained-edge log-likelihood."""
    if not dataset.edges:
        raise EmptyLikelihoodError("no rank-breaking edges retained; increase M")

    def objective(values: np.ndarray) -> GradientResult:
        return total_log_likelihood(values, dataset, workers=opts.workers)

    result = maximize(objective, dataset.d, opts, scale=dataset.effective_sample_size)
    return _with_connectivity(result, is_connected(dataset))


# -- full MLE over consistent rankings ---------------------------------------


def consistent_orders(block_sizes: Sequence[int]) -> np.ndarray:
    """Position patterns of every ranking consistent with an ordered partition.

    ``block_sizes`` is top-down; rows index into the concatenated top-down
    blocks and list positions from most to least preferred.
    """
    offsets = np.cumsum([0, *block_sizes])
    per_block = [
        [tuple(lo + k for k in p) for p in itertools.permutations(range(size))]
        for lo, size in zip(offsets, block_sizes)
    ]
    return np.array([sum(combo, ()) for combo in itertools.product(*per_block)], dtype=np.int64)


def _ranking_batch(values: np.ndarray, items: np.ndarray):
    """Log-probabilities and gradients (w.r.t. ``values[items]``) of full rankings."""
    th = values[items]
    kappa = th.shape[1]
    suffix = np.logaddexp.accumulate(th[:, ::-1], axis=1)[:, ::-1]
    log_p = (th[:, :-1] - suffix[:, :-1]).sum(axis=1)
    inv = np.exp(-suffix[:, :-1])
    cum = np.cumsum(inv, axis=1)
    cum = np.concatenate([cum, cum[:, -1:]], axis=1)
    grad = -np.exp(th) * cum
    grad[:, : kappa - 1] += 1.0
    return log_p, grad


def full_poset_log_likelihood(values: np.ndarray, observations: Sequence[Observation], d: int) -> GradientResult:
    """Sum over observations of log sum_{consistent rankings} P[ranking]."""
    groups: dict[tuple[int, ...], list[list[int]]] = {}
    for obs in observations:
        if obs.kappa > KAPPA_ENUM_CAP:
            raise ConfigError(f"offer set of size {obs.kappa} exceeds enumeration cap {KAPPA_ENUM_CAP}")
        top_down = obs.partition.blocks[::-1]
        key = tuple(len(b) for b in top_down)
        groups.setdefault(key, []).append([i for b in top_down for i in sorted(b)])

    value = 0.0
    gradient = np.zeros(d)
    terms = 0
    for sizes, rows in sorted(groups.items()):
        items = np.array(rows, dtype=np.int64)
        patterns = consistent_orders(sizes)
        terms += len(patterns) * len(items)
        run_max = np.full(len(items), -np.inf)
        run_sum = np.zeros(len(items))
        acc = np.zeros(items.shape)
        for pat in patterns:
            log_p, g = _ranking_batch(values, items[:, pat])
            new_max = np.maximum(run_max, log_p)
            rescale = np.exp(run_max - new_max)
            weight = np.exp(log_p - new_max)
            run_sum = run_sum * rescale + weight
            acc *= rescale[:, None]
            acc[:, pat] += weight[:, None] * g
            run_max = new_max
        value += float((run_max + np.log(run_sum)).sum())
        gradient += np.bincount(items.ravel(), weights=(acc / run_sum[:, None]).ravel(), minlength=d)
    return GradientResult(value, gradient, terms)


def full_mle_small(dataset: Dataset, opts: FitOptions = FitOptions()) -> FitResult:
    """Exact MLE summing over all rankings consistent with each observation.

    Only feasible for small offer sets. At the optimum the objective is
    checked against the all-edges rank-breaking likelihood, which must
    agree by the memoryless property of the PL model.
    """
    observations = dataset.observations
    if not observations:
        raise EmptyLikelihoodError("empty dataset")
    d = dataset.d

    def objective(values: np.ndarray) -> GradientResult:
        return full_poset_log_likelihood(values, observations, d)

    all_edges = dataset.with_M(None)
    result = maximize(objective, d, opts, scale=all_edges.effective_sample_size)
    check = total_log_likelihood(result.theta_hat, all_edges).value
    if abs(check - result.final_value) > 1e-8 * max(1.0, abs(check)):
        raise NumericalError(
            f"poset likelihood {result.final_value} disagrees with edge decomposition {check}"
        )
    return _with_connectivity(result, is_connected(all_edges))


# -- inconsistent pairwise rank-breaking -------------------------------------


def implied_pairs(dataset: Dataset) -> np.ndarray:
    """Win counts ``W[winner, loser]`` over every cross-block pair."""
    wins = np.zeros((dataset.d, dataset.d), dtype=np.int64)
    for obs in dataset.observations:
        for w, l in ((y, x) for x, y in obs.partition.relations()):
            wins[w, l] += 1
    return wins


def pairwise_log_likelihood(values: np.ndarray, winners: np.ndarray, losers: np.ndarray, counts: np.ndarray) -> GradientResult:
    diff = values[winners] - values[losers]
    # log sigmoid(diff), stable on both tails
    value = float(-(counts * np.logaddexp(0.0, -diff)).sum())
    slope = counts * np.exp(-np.logaddexp(0.0, diff))
    d = values.size
    grad = np.bincount(winners, weights=slope, minlength=d) - np.bincount(losers, weights=slope, minlength=d)
    return GradientResult(value, grad, int(counts.sum()))


def pairwise_rb_inconsistent(dataset: Dataset, opts: FitOptions = FitOptions()) -> FitResult:
    """Treat every implied pair as an independent comparison and fit by MLE."""
    wins = implied_pairs(dataset)
    winners, losers = np.nonzero(wins)
    if winners.size == 0:
        raise EmptyLikelihoodError("no implied pairwise comparisons")
    counts = wins[winners, losers].astype(float)

    def objective(values: np.ndarray) -> GradientResult:
        return pairwise_log_likelihood(values, winners, losers, counts)

    result = maximize(objective, dataset.d, opts, scale=float(counts.sum()))
    pairs = np.stack([winners, losers], axis=1)
    return _with_connectivity(result, _components(dataset.d, [pairs]) == 1)


# -- oracle MLE with the hidden top-set orderings ----------------------------


def refine_observation(obs: Observation, top_order: Sequence[int]) -> Observation:
    """Split every non-bottom block into singletons following ``top_order`` (best first)."""
    blocks = obs.partition.blocks
    expected = frozenset().union(*blocks[1:]) if len(blocks) > 1 else frozenset()
    top_order = [int(i) for i in top_order]
    if frozenset(top_order) != expected or len(top_order) != len(expected):
        raise DataError("hidden ordering does not cover the top blocks")
    position = {item: k for k, item in enumerate(top_order)}
    for upper, lower in zip(blocks[:0:-1], blocks[-2:0:-1]):
        if max(position[i] for i in upper) > min(position[i] for i in lower):
            raise DataError("hidden ordering contradicts the block order")
    return Observation.from_top_down([{i} for i in top_order] + [blocks[0]])


def oracle_dataset(dataset: Dataset, top_orders: Sequence[Sequence[int]] | None) -> Dataset:
    if top_orders is None or len(top_orders) != dataset.n:
        raise DataError("oracle estimator needs one hidden ordering per observation")
    refined = [refine_observation(o, t) for o, t in zip(dataset.observations, top_orders)]
    return Dataset(dataset.d, refined, M=1)


def oracle_mle(
    dataset: Dataset,
    top_orders: Sequence[Sequence[int]] | None,
    opts: FitOptions = FitOptions(),
) -> FitResult:
    """PL MLE on observations whose top blocks are fully ordered."""
    return fit_order_M(oracle_dataset(dataset, top_orders), opts)


def squared_error(result: FitResult, truth: Theta | np.ndarray) -> float:
    diff = result.theta_hat.values - np.asarray(truth, dtype=float)
    return float(diff @ diff)


__all__ = [
    "FitOptions",
    "FitResult",
    "consistent_orders",
    "fit_order_M",
    "full_mle_small",
    "full_poset_log_likelihood",
    "implied_pairs",
    "is_connected",
    "maximize",
    "oracle_mle",
    "pairwise_rb_inconsistent",
    "squared_error",
]
