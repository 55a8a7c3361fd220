"""Seeded generators for canonical ordered-partition workloads."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError
from .likelihood import Dataset
from .model import Theta, project_to_omega, race_order
from .poset import Observation, OrderedPartition


@dataclass(frozen=True)
class ScenarioConfig:
    """Canonical sampling scenario.

    ``block_sizes`` lists the ordered top blocks, most preferred first;
    the remaining ``kappa - sum(block_sizes)`` items form the bottom block.
    ``kappa=None`` offers every item to every user.
    """

    d: int
    n: int
    block_sizes: tuple[int, ...]
    kappa: int | None = None
    b: float = 2.0
    seed: int = 0
    theta_star: Theta | None = field(default=None, compare=False)
    keep_top_orderings: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))
        if self.d < 2:
            raise ConfigError("need at least two items")
        if self.n < 1:
            raise ConfigError("need at least one user")
        kappa = self.offer_size
        if kappa < 2 or kappa > self.d:
            raise ConfigError(f"offer size must lie in [2, d], got {kappa}")
        if not self.block_sizes or min(self.block_sizes) < 1:
            raise ConfigError("block sizes must be positive")
        if sum(self.block_sizes) >= kappa:
            raise ConfigError("block sizes must sum to less than the offer size")
        if not self.b > 0:
            raise ConfigError("b must be positive")
        if self.theta_star is not None and self.theta_star.d != self.d:
            raise ConfigError("theta_star has the wrong dimension")

    @property
    def offer_size(self) -> int:
        return self.d if self.kappa is None else int(self.kappa)


def sample_theta(d: int, b: float, rng: np.random.Generator) -> Theta:
    """i.i.d. uniform utilities on [-b, b], projected onto Omega_b."""
    return project_to_omega(rng.uniform(-b, b, size=d), b)


def user_rng(seed: int, user: int) -> np.random.Generator:
    """Independent stream for one user, stable under reordering or parallel generation."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(user,))))


def theta_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2**32,))))


def slice_ranking(order: Sequence[int], block_sizes: Sequence[int]) -> OrderedPartition:
    """Cut a best-first ranking into top blocks of the given sizes plus a bottom block."""
    blocks, start = [], 0
    for size in block_sizes:
        blocks.append(order[start:start + size])
        start += size
    blocks.append(order[start:])
    return OrderedPartition.from_top_down(blocks)


class SyntheticData(NamedTuple):
    dataset: Dataset
    theta_star: Theta
    top_orders: list[tuple[int, ...]] | None


def generate_canonical(config: ScenarioConfig) -> SyntheticData:
    """Sample PL rankings and coarsen each into the configured ordered partition."""
    theta = config.theta_star if config.theta_star is not None else sample_theta(config.d, config.b, theta_rng(config.seed))
    kappa = config.offer_size
    n_top = sum(config.block_sizes)
    values = theta.values
    all_items = np.arange(config.d)
    observations, orders = [], []
    for j in range(config.n):
        rng = user_rng(config.seed, j)
        offer = all_items if kappa == config.d else np.sort(rng.choice(config.d, size=kappa, replace=False))
        order = race_order(values, offer, rng).tolist()
        observations.append(Observation(slice_ranking(order, config.block_sizes)))
        orders.append(tuple(order[:n_top]))
    return SyntheticData(
        Dataset(config.d, observations),
        theta,
        orders if config.keep_top_orderings else None,
    )


def tradeoff_blocks(d: int, c: float = 0.5) -> tuple[int, ...]:
    """Triangular top blocks 1, 2, ..., l-1 with l = floor(sqrt(2c) d^(1/4)) subsets in total."""
    n_subsets = math.floor(math.sqrt(2 * c) * d**0.25 + 1e-12)
    blocks = tuple(range(1, n_subsets))
    if n_subsets < 2:
        raise ConfigError(f"c = {c} leaves fewer than two subsets for d = {d}")
    if sum(blocks) > c * math.sqrt(d):
        raise ConfigError(f"top blocks sum to {sum(blocks)} > c sqrt(d) = {c * math.sqrt(d):.3f}")
    if d - sum(blocks) < d / 2:
        raise ConfigError("bottom block must hold at least half of the items")
    return blocks


def generate_tradeoff(d: int, n: int, c: float = 0.5, b: float = 2.0, seed: int = 0,
                      theta_star: Theta | None = None) -> SyntheticData:
    """All-items workload with triangular blocks; the bottom block holds the rest."""
    config = ScenarioConfig(d=d, n=n, block_sizes=tradeoff_blocks(d, c), b=b, seed=seed, theta_star=theta_star)
    return generate_canonical(config)
