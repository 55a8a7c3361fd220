"""Plackett-Luce parameter space, ranking probabilities and sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DataError

SUM_TOL = 1e-9
BOX_SLACK = 1e-12


@dataclass(frozen=True)
class Theta:
    """Centered, box-bounded utility vector (an element of Omega_b)."""

    values: np.ndarray
    b: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ConfigError("theta needs at least two items")
        if not np.all(np.isfinite(values)):
            raise ConfigError("theta has non-finite entries")
        if self.b < 0:
            raise ConfigError("box bound b must be non-negative")
        if abs(values.sum()) > SUM_TOL:
            raise ConfigError(f"theta must sum to zero, got {values.sum():.3e}")
        if np.max(np.abs(values)) > self.b + BOX_SLACK:
            raise ConfigError("theta leaves the box [-b, b]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "b", float(self.b))

    @property
    def d(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class Ranking:
    """A total order over an offer set; ``order[0]`` is the most preferred item."""

    offer_set: tuple[int, ...]
    order: tuple[int, ...]

    def __post_init__(self) -> None:
        offer = tuple(int(i) for i in self.offer_set)
        order = tuple(int(i) for i in self.order)
        if len(set(offer)) != len(offer):
            raise DataError("offer set has duplicate items")
        if len(order) != len(offer) or set(order) != set(offer):
            raise DataError("order is not a permutation of the offer set")
        object.__setattr__(self, "offer_set", offer)
        object.__setattr__(self, "order", order)

    @classmethod
    def from_order(cls, order: Iterable[int]) -> "Ranking":
        order = tuple(order)
        return cls(offer_set=tuple(sorted(order)), order=order)


def _box_sum(raw: np.ndarray, shift: float, b: float) -> float:
    return float(np.clip(raw - shift, -b, b).sum())


def project_to_omega(raw: Sequence[float], b: float) -> Theta:
    """Euclidean projection onto {x : sum(x) = 0, |x_i| <= b}.

    The projection is ``clip(raw - tau, -b, b)`` for the scalar ``tau`` at
    which the clipped vector sums to zero. The sum is monotone and
    piecewise linear in ``tau``; bisection locates the linear piece and
    the root is then solved exactly on it.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size < 2:
        raise ConfigError("need a vector of at least two entries")
    if not np.all(np.isfinite(raw)):
        raise ConfigError("non-finite entries in raw vector")
    if not b > 0:
        raise ConfigError("box bound b must be positive")

    lo, hi = float(raw.min()) - b, float(raw.max()) + b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _box_sum(raw, mid, b) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    tau = 0.5 * (lo + hi)

    # exact root on the current linear piece
    shifted = raw - tau
    free = np.abs(shifted) < b
    if free.any():
        n_up = np.count_nonzero(shifted >= b)
        n_low = np.count_nonzero(shifted <= -b)
        cand = (raw[free].sum() + b * (n_up - n_low)) / np.count_nonzero(free)
        if np.array_equal(np.abs(raw - cand) < b, free):
            tau = cand
    x = np.clip(raw - tau, -b, b)
    # remove the last few ulps of drift from the free coordinates
    free = np.abs(x) < b
    if free.any():
        x[free] -= x.sum() / np.count_nonzero(free)
        x = np.clip(x, -b, b)
    return Theta(x, b)


def _check_items(items: Sequence[int], d: int) -> np.ndarray:
    idx = np.asarray(items, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise DataError(f"item ids must lie in [0, {d})")
    if np.unique(idx).size != idx.size:
        raise DataError("duplicate items")
    return idx


def ranking_probability(theta: Theta | np.ndarray, ranking: Ranking) -> float:
    """Log-probability of a full ranking under the PL model."""
    values = np.asarray(theta, dtype=float)
    idx = _check_items(ranking.order, values.size)
    if idx.size < 2:
        raise DataError("a ranking needs at least two items")
    th = values[idx]
    # log-denominator at position i is logsumexp of th[i:]
    suffix = np.logaddexp.accumulate(th[::-1])[::-1]
    return float(np.sum(th[:-1] - suffix[:-1]))


def log_choice_prob(theta: Theta | np.ndarray, winner: int, offer: Sequence[int]) -> float:
    """Log-probability that ``winner`` is chosen first from ``offer``."""
    values = np.asarray(theta, dtype=float)
    idx = _check_items(offer, values.size)
    return float(values[winner] - logsumexp(values[idx]))


def sample_ranking(
    theta: Theta | np.ndarray,
    offer_set: Iterable[int],
    rng: np.random.Generator,
) -> Ranking:
    """Draw a PL ranking of ``offer_set`` by an exponential race.

    Each item gets an arrival time with rate ``exp(theta_i)``; items are
    ranked by increasing arrival, ties going to the smaller id.
    """
    values = np.asarray(theta, dtype=float)
    items = np.array(sorted(set(int(i) for i in offer_set)), dtype=np.int64)
    if items.size < 2:
        raise DataError("offer set needs at least two items")
    _check_items(items, values.size)
    order = race_order(values, items, rng)
    return Ranking(offer_set=tuple(items.tolist()), order=tuple(order.tolist()))


def race_order(values: np.ndarray, items: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unchecked core of :func:`sample_ranking`; ``items`` must be sorted and distinct."""
    arrivals = rng.standard_exponential(items.size) * np.exp(-values[items])
    return items[np.lexsort((items, arrivals))]
