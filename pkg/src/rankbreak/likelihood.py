"""Rank-breaking edge probabilities, the order-M log-likelihood and its gradient.

Edges are grouped by shape ``(m, r)`` into integer index arrays so that a
sweep over the ``m!`` orderings of the top-set runs vectorized across every
edge of the group. Per-ordering terms are folded into a streaming
log-sum-exp; nothing of size ``m!`` is ever stored.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ComplexityCapError, DataError, EmptyLikelihoodError, NumericalError
from .model import Theta
from .poset import Observation, RankBreakingEdge

ENUMERATION_CAP = 8


@dataclass(frozen=True)
class EdgeBatch:
    """Edges sharing one shape: ``top`` is (E, m), ``bottom`` is (E, r - m)."""

    top: np.ndarray
    bottom: np.ndarray

    @property
    def m(self) -> int:
        return self.top.shape[1]

    @property
    def r(self) -> int:
        return self.top.shape[1] + self.bottom.shape[1]

    def __len__(self) -> int:
        return self.top.shape[0]

    def split(self, parts: int) -> list["EdgeBatch"]:
        bounds = np.linspace(0, len(self), parts + 1).astype(int)
        return [
            EdgeBatch(self.top[lo:hi], self.bottom[lo:hi])
            for lo, hi in zip(bounds, bounds[1:])
            if hi > lo
        ]


def batch_edges(edges: Iterable[RankBreakingEdge]) -> list[EdgeBatch]:
    """Group edges by shape, keeping their original relative order."""
    groups: dict[tuple[int, int], tuple[list, list]] = {}
    for e in edges:
        tops, bots = groups.setdefault((e.m, e.r), ([], []))
        tops.append(sorted(e.top))
        bots.append(sorted(e.bottom))
    return [
        EdgeBatch(np.array(tops, dtype=np.int64), np.array(bots, dtype=np.int64))
        for _, (tops, bots) in sorted(groups.items())
    ]


@dataclass
class Dataset:
    """Observations over ``d`` items, with edges retained up to top-set size ``M``.

    ``M=None`` keeps every edge.
    """

    d: int
    observations: list[Observation]
    M: int | None = None

    def __post_init__(self) -> None:
        if self.d < 2:
            raise DataError("need at least two items")
        if self.M is not None and self.M < 1:
            raise DataError("M must be a positive integer")
        for obs in self.observations:
            if min(obs.offer_set) < 0 or max(obs.offer_set) >= self.d:
                raise DataError(f"observation items must lie in [0, {self.d})")

    def with_M(self, M: int | None) -> "Dataset":
        return Dataset(self.d, self.observations, M)

    def retained(self, obs: Observation) -> list[RankBreakingEdge]:
        if self.M is None:
            return list(obs.edges)
        return [e for e in obs.edges if e.m <= self.M]

    @cached_property
    def edges(self) -> list[RankBreakingEdge]:
        return [e for obs in self.observations for e in self.retained(obs)]

    @cached_property
    def batches(self) -> list[EdgeBatch]:
        return batch_edges(self.edges)

    @cached_property
    def p(self) -> np.ndarray:
        """Per-observation effective sample size."""
        return np.array([sum(e.m for e in self.retained(o)) for o in self.observations], dtype=np.int64)

    @cached_property
    def kappa(self) -> np.ndarray:
        return np.array([o.kappa for o in self.observations], dtype=np.int64)

    @property
    def effective_sample_size(self) -> int:
        return int(self.p.sum())

    @property
    def n(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class GradientResult:
    value: float
    gradient: np.ndarray
    permutation_terms: int = field(default=0)


def _batch_eval(values: np.ndarray, batch: EdgeBatch, with_grad: bool = True):
    """Log-probabilities (E,) of a batch and, optionally, per-item gradients."""
    m = batch.m
    if m > ENUMERATION_CAP:
        raise ComplexityCapError(f"top-set of size {m} exceeds enumeration cap {ENUMERATION_CAP}")
    th_top = values[batch.top]
    th_bot = values[batch.bottom]
    shift = np.maximum(th_top.max(axis=1), th_bot.max(axis=1))
    w_top = np.exp(th_top - shift[:, None])
    w_bot = np.exp(th_bot - shift[:, None])
    bottom_mass = w_bot.sum(axis=1)

    n_edges = len(batch)
    run_max = np.full(n_edges, -np.inf)
    run_sum = np.zeros(n_edges)
    acc_top = np.zeros((n_edges, m))
    acc_bot = np.zeros(n_edges)
    for perm in itertools.permutations(range(m)):
        perm = list(perm)
        ordered = w_top[:, perm]
        denom = np.cumsum(ordered[:, ::-1], axis=1)[:, ::-1] + bottom_mass[:, None]
        log_term = -np.log(denom).sum(axis=1)
        new_max = np.maximum(run_max, log_term)
        rescale = np.exp(run_max - new_max)
        weight = np.exp(log_term - new_max)
        run_sum = run_sum * rescale + weight
        if with_grad:
            # partial sums of inverse denominators up to each position
            inv_cum = np.cumsum(1.0 / denom, axis=1)
            acc_top *= rescale[:, None]
            acc_top[:, perm] += weight[:, None] * inv_cum
            acc_bot = acc_bot * rescale + weight * inv_cum[:, -1]
        run_max = new_max

    log_p = (th_top - shift[:, None]).sum(axis=1) + run_max + np.log(run_sum)
    if not with_grad:
        return log_p, None, None
    g_top = 1.0 - w_top * acc_top / run_sum[:, None]
    g_bot = -w_bot * (acc_bot / run_sum)[:, None]
    return log_p, g_top, g_bot


def _edge_batch(edge: RankBreakingEdge, d: int) -> EdgeBatch:
    items = np.fromiter(edge.items, dtype=np.int64)
    if items.min() < 0 or items.max() >= d:
        raise DataError(f"edge items must lie in [0, {d})")
    return EdgeBatch(
        np.array([sorted(edge.top)], dtype=np.int64),
        np.array([sorted(edge.bottom)], dtype=np.int64),
    )


def edge_log_prob(theta: Theta | np.ndarray, edge: RankBreakingEdge) -> float:
    """log P(every item of the top-set beats every item of the bottom-set)."""
    values = np.asarray(theta, dtype=float)
    log_p, _, _ = _batch_eval(values, _edge_batch(edge, values.size), with_grad=False)
    return float(log_p[0])


def edge_log_prob_gradient(theta: Theta | np.ndarray, edge: RankBreakingEdge) -> dict[int, float]:
    """Gradient of :func:`edge_log_prob`, keyed by the items of the edge."""
    values = np.asarray(theta, dtype=float)
    batch = _edge_batch(edge, values.size)
    _, g_top, g_bot = _batch_eval(values, batch)
    grad = dict(zip(batch.top[0].tolist(), g_top[0].tolist()))
    grad.update(zip(batch.bottom[0].tolist(), g_bot[0].tolist()))
    return grad


def permutation_terms(batches: Sequence[EdgeBatch]) -> int:
    return sum(len(b) * math.factorial(b.m) for b in batches)


def batches_log_likelihood(
    values: np.ndarray,
    batches: Sequence[EdgeBatch],
    d: int,
    with_grad: bool = True,
    workers: int = 1,
) -> GradientResult:
    """Sum of edge log-probabilities (and gradients) over edge batches.

    With ``workers > 1`` every batch is cut into that many contiguous
    chunks; partial sums are reduced in chunk order, so results are
    repeatable for a fixed worker count.
    """
    chunks = [c for b in batches for c in (b.split(workers) if workers > 1 else [b])]
    if not chunks:
        raise EmptyLikelihoodError("no rank-breaking edges retained")

    def run(chunk: EdgeBatch):
        return chunk, _batch_eval(values, chunk, with_grad)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    value = 0.0
    grad = np.zeros(d)
    for chunk, (log_p, g_top, g_bot) in results:
        value += float(log_p.sum())
        if with_grad:
            grad += np.bincount(chunk.top.ravel(), weights=g_top.ravel(), minlength=d)
            grad += np.bincount(chunk.bottom.ravel(), weights=g_bot.ravel(), minlength=d)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite log-likelihood")
    return GradientResult(value, grad, permutation_terms(chunks))


def total_log_likelihood(
    theta: Theta | np.ndarray,
    dataset: Dataset,
    workers: int = 1,
) -> GradientResult:
    """Order-M rank-breaking log-likelihood and its gradient."""
    values = np.asarray(theta, dtype=float)
    if values.size != dataset.d:
        raise DataError("theta and dataset disagree on the number of items")
    return batches_log_likelihood(values, dataset.batches, dataset.d, workers=workers)
