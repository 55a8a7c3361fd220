"""Dataset JSONL files and their sidecars.

Each dataset line is ``{"offer": [...], "blocks": [[...], ...]}`` with the
blocks listed least preferred first and every id list sorted. The ground
truth sidecar holds ``{"theta": [...], "b": ...}``; hidden top-block
orderings live in a separate JSONL file with one ``{"top_order": [...]}``
per observation, best first.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .likelihood import Dataset
from .model import Theta
from .poset import Observation, OrderedPartition


def observation_record(obs: Observation) -> dict:
    return {
        "offer": sorted(obs.offer_set),
        "blocks": [sorted(b) for b in obs.partition.blocks],
    }


def dumps_observation(obs: Observation) -> str:
    return json.dumps(observation_record(obs))


def parse_observation(line: str, lineno: int = 0) -> Observation:
    try:
        rec = json.loads(line)
        blocks = [frozenset(int(i) for i in blk) for blk in rec["blocks"]]
        offer = frozenset(int(i) for i in rec["offer"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"line {lineno}: malformed observation ({exc})") from exc
    partition = OrderedPartition(tuple(blocks))
    if partition.offer_set != offer:
        raise DataError(f"line {lineno}: blocks do not cover the offer set")
    return Observation(partition)


def write_dataset(path: str | Path, observations: Iterable[Observation]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obs in observations:
            fh.write(dumps_observation(obs) + "\n")


def read_observations(path: str | Path) -> list[Observation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                out.append(parse_observation(line, lineno))
    if not out:
        raise DataError(f"{path}: no observations")
    return out


def read_dataset(path: str | Path, d: int | None = None, M: int | None = None) -> Dataset:
    """Load a dataset; ``d`` defaults to one past the largest item id."""
    observations = read_observations(path)
    top = max(max(o.offer_set) for o in observations) + 1
    if d is None:
        d = top
    elif d < top:
        raise DataError(f"dataset mentions item {top - 1} but d = {d}")
    return Dataset(d, observations, M)


def write_truth(path: str | Path, theta: Theta) -> None:
    Path(path).write_text(json.dumps({"theta": theta.values.tolist(), "b": theta.b}) + "\n", encoding="utf-8")


def read_truth(path: str | Path) -> Theta:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
        return Theta(rec["theta"], rec["b"])
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed ground truth ({exc})") from exc


def write_orderings(path: str | Path, orders: Iterable[Sequence[int]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for order in orders:
            fh.write(json.dumps({"top_order": [int(i) for i in order]}) + "\n")


def read_orderings(path: str | Path) -> list[list[int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append([int(i) for i in json.loads(line)["top_order"]])
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed ordering ({exc})") from exc
    return out


def write_labels(path: str | Path, labels: Sequence[str]) -> None:
    Path(path).write_text(json.dumps({"labels": list(labels)}) + "\n", encoding="utf-8")


def sidecar(path: str | Path, kind: str) -> Path:
    """``data.jsonl`` -> ``data.<kind>.json`` (or ``.jsonl`` for orderings)."""
    path = Path(path)
    suffix = ".jsonl" if kind == "orderings" else ".json"
    return path.with_name(f"{path.stem}.{kind}{suffix}")
