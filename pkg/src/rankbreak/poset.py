"""Posets, maximal ordered partitions and rank-breaking edges."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InconsistentPosetError

KAPPA_CAP = 128


@dataclass(frozen=True)
class Poset:
    """Preference relations over an offer set.

    Each relation ``(x, y)`` reads "x is less preferred than y".
    """

    offer_set: frozenset[int]
    relations: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        offer = frozenset(int(i) for i in self.offer_set)
        rels = tuple((int(x), int(y)) for x, y in self.relations)
        for x, y in rels:
            if x not in offer or y not in offer:
                raise DataError(f"relation ({x}, {y}) leaves the offer set")
        object.__setattr__(self, "offer_set", offer)
        object.__setattr__(self, "relations", rels)

    @classmethod
    def from_groups(cls, offer: Iterable[int], groups: Iterable[tuple[Iterable[int], Iterable[int]]]) -> "Poset":
        """Build from ``(lower_items, upper_items)`` pairs, e.g. ``({6}, {5, 4})``."""
        rels = [(x, y) for lo, hi in groups for x in lo for y in hi]
        return cls(frozenset(offer), tuple(rels))


@dataclass(frozen=True)
class OrderedPartition:
    """Disjoint blocks ordered from least preferred (first) to most preferred (last)."""

    blocks: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        blocks = tuple(frozenset(int(i) for i in blk) for blk in self.blocks)
        if not blocks:
            raise DataError("partition needs at least one block")
        seen: set[int] = set()
        for blk in blocks:
            if not blk:
                raise DataError("empty block in partition")
            if seen & blk:
                raise DataError("partition blocks overlap")
            seen |= blk
        object.__setattr__(self, "blocks", blocks)

    @property
    def offer_set(self) -> frozenset[int]:
        return frozenset().union(*self.blocks)

    @classmethod
    def from_top_down(cls, blocks: Sequence[Iterable[int]]) -> "OrderedPartition":
        return cls(tuple(frozenset(b) for b in reversed(blocks)))

    def relations(self) -> list[tuple[int, int]]:
        """All cross-block pairs ``(lower, upper)`` implied by the partition."""
        out = []
        for k, upper in enumerate(self.blocks):
            below = frozenset().union(*self.blocks[:k])
            out.extend((x, y) for x in sorted(below) for y in sorted(upper))
        return out


@dataclass(frozen=True)
class RankBreakingEdge:
    """Ordinal event "every item of ``top`` beats every item of ``bottom``"."""

    top: frozenset[int]
    bottom: frozenset[int]

    def __post_init__(self) -> None:
        top, bottom = frozenset(self.top), frozenset(self.bottom)
        if not top or not bottom:
            raise DataError("edge needs non-empty top and bottom sets")
        if top & bottom:
            raise DataError("top and bottom sets overlap")
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "bottom", bottom)

    @property
    def m(self) -> int:
        return len(self.top)

    @property
    def r(self) -> int:
        return len(self.top) + len(self.bottom)

    @property
    def items(self) -> frozenset[int]:
        return self.top | self.bottom


@dataclass(frozen=True)
class Observation:
    """One user's offer set, extracted partition and rank-breaking edges."""

    partition: OrderedPartition
    edges: tuple[RankBreakingEdge, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.edges is None:
            object.__setattr__(self, "edges", tuple(breaking_edges(self.partition)))
        elif len(self.edges) != len(self.partition.blocks) - 1:
            raise DataError("edge count must equal number of blocks minus one")

    @property
    def offer_set(self) -> frozenset[int]:
        return self.partition.offer_set

    @property
    def kappa(self) -> int:
        return len(self.offer_set)

    @classmethod
    def from_top_down(cls, blocks: Sequence[Iterable[int]]) -> "Observation":
        return cls(OrderedPartition.from_top_down(blocks))


def transitive_closure(reach: np.ndarray) -> np.ndarray:
    """Boolean reachability by repeated squaring."""
    closure = reach.astype(bool)
    while True:
        step = closure | ((closure.astype(np.int64) @ closure.astype(np.int64)) > 0)
        if np.array_equal(step, closure):
            return closure
        closure = step


def extract_ordered_partition(poset: Poset, kappa_cap: int = KAPPA_CAP) -> OrderedPartition:
    """Maximal ordered partition consistent with ``poset``.

    A complete cut is a set C lying entirely below its complement in the
    transitive closure. The cuts form a chain, and consecutive differences
    are the blocks. A cut of size k must consist of the k items with the
    most items above them, which gives one candidate per size.
    """
    items = sorted(poset.offer_set)
    kappa = len(items)
    if kappa == 0:
        raise DataError("empty offer set")
    if kappa > kappa_cap:
        raise DataError(f"offer set of size {kappa} exceeds cap {kappa_cap}")
    pos = {item: k for k, item in enumerate(items)}
    reach = np.zeros((kappa, kappa), dtype=bool)
    for x, y in poset.relations:
        reach[pos[x], pos[y]] = True
    closure = transitive_closure(reach)
    if np.any(np.diag(closure)):
        raise InconsistentPosetError("poset relations contain a cycle")

    above = closure.sum(axis=1)
    cuts = [np.zeros(kappa, dtype=bool)]
    for k in range(1, kappa):
        cand = above >= kappa - k
        if np.count_nonzero(cand) != k:
            continue
        if closure[np.ix_(cand, ~cand)].all():
            cuts.append(cand)
    cuts.append(np.ones(kappa, dtype=bool))
    for small, big in zip(cuts, cuts[1:]):
        assert not np.any(small & ~big), "complete cuts are not nested"

    blocks = []
    for small, big in zip(cuts, cuts[1:]):
        members = np.flatnonzero(big & ~small)
        blocks.append(frozenset(items[k] for k in members))
    return OrderedPartition(tuple(blocks))


def breaking_edges(partition: OrderedPartition) -> list[RankBreakingEdge]:
    """One edge per non-bottom block, listed from the top block down."""
    edges = []
    blocks = partition.blocks
    for k in range(len(blocks) - 1, 0, -1):
        bottom = frozenset().union(*blocks[:k])
        edges.append(RankBreakingEdge(top=blocks[k], bottom=bottom))
    return edges


def filter_order_M(edges: Iterable[RankBreakingEdge], M: int) -> list[RankBreakingEdge]:
    """Keep edges whose top-set has at most ``M`` items, preserving order."""
    if M < 1:
        raise DataError("M must be a positive integer")
    return [e for e in edges if e.m <= M]


def effective_size(edges: Iterable[RankBreakingEdge]) -> int:
    """Sum of top-set sizes, the per-observation effective sample size."""
    return sum(e.m for e in edges)
