import itertools
import math

import numpy as np
import pytest

from rankbreak.model import project_to_omega


def pl_prob(theta, order):
    """PL probability of a best-first order, as a plain product of choice ratios."""
    p = 1.0
    for k in range(len(order) - 1):
        num = math.exp(theta[order[k]])
        den = sum(math.exp(theta[i]) for i in order[k:])
        p *= num / den
    return p


def brute_edge_prob(theta, top, bottom):
    """P(top beats bottom) by summing over every ranking of top | bottom."""
    top, items = set(top), sorted(set(top) | set(bottom))
    m = len(top)
    return sum(pl_prob(theta, perm) for perm in itertools.permutations(items) if set(perm[:m]) == top)


def brute_partition_prob(theta, blocks_bottom_up):
    """Probability of an ordered partition, summing over every ranking of its items."""
    items = sorted(set().union(*blocks_bottom_up))
    top_down = blocks_bottom_up[::-1]
    total = 0.0
    for perm in itertools.permutations(items):
        start, ok = 0, True
        for blk in top_down:
            if set(perm[start:start + len(blk)]) != set(blk):
                ok = False
                break
            start += len(blk)
        if ok:
            total += pl_prob(theta, perm)
    return total


def random_theta(rng, d, b=2.0):
    return project_to_omega(rng.uniform(-b, b, size=d), b)


def random_blocks(rng, items, max_blocks=None):
    """Random ordered partition of ``items`` as bottom-up list of sets."""
    items = list(rng.permutation(items))
    k = len(items)
    n_blocks = int(rng.integers(2, min(max_blocks or k, k) + 1)) if k >= 2 else 1
    cuts = sorted(rng.choice(np.arange(1, k), size=n_blocks - 1, replace=False).tolist())
    bounds = [0, *cuts, k]
    return [set(int(i) for i in items[lo:hi]) for lo, hi in zip(bounds, bounds[1:])]


class AcceptanceLog:
    def __init__(self):
        self.lines = []

    def record(self, number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}"
        self.lines.append(line)
        print(line)


_LOG = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance_log():
    return _LOG


def pytest_terminal_summary(terminalreporter):
    if _LOG.lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LOG.lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20161205)
