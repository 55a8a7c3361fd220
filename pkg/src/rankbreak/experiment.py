"""Seeded estimator sweeps producing one CSV row per (n, trial, estimator, M)."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .estimator import (
    KAPPA_ENUM_CAP,
    FitOptions,
    FitResult,
    fit_order_M,
    full_mle_small,
    oracle_mle,
    pairwise_rb_inconsistent,
    squared_error,
)
from .synth import ScenarioConfig, generate_canonical, sample_theta

ESTIMATORS = ("grb", "prb", "oracle", "full_mle")
CSV_VERSION = 1
COLUMNS = ("estimator", "M", "n", "trial", "mse", "mse_over_d2", "iterations", "permutation_terms")
TIMING_COLUMNS = ("estimator", "M", "n", "trial", "seconds")


@dataclass(frozen=True)
class ExperimentSpec:
    d: int
    block_sizes: tuple[int, ...]
    n_values: tuple[int, ...]
    M_values: tuple[int, ...] = (1,)
    kappa: int | None = None
    b: float = 2.0
    trials: int = 20
    estimators: tuple[str, ...] = ("grb",)
    seed: int = 0
    fit_b: float | None = None
    max_iters: int = 5000
    grad_tol: float = 1e-7
    workers: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        for name in ("block_sizes", "n_values", "M_values", "estimators"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.n_values or min(self.n_values) < 1:
            raise ConfigError("every n must be at least 1")
        if not self.M_values or min(self.M_values) < 1:
            raise ConfigError("every M must be at least 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        # validates d, kappa and block sizes
        self.scenario(1, None)
        if "grb" in self.estimators and min(self.M_values) < min(self.block_sizes):
            raise ConfigError("some M retains no edge: M must be at least the smallest block size")
        kappa = self.d if self.kappa is None else self.kappa
        if "full_mle" in self.estimators and kappa > KAPPA_ENUM_CAP:
            raise ConfigError(f"full_mle needs offer sets of at most {KAPPA_ENUM_CAP} items")

    def scenario(self, n: int, theta_star, seed: int = 0) -> ScenarioConfig:
        return ScenarioConfig(
            d=self.d, n=n, block_sizes=self.block_sizes, kappa=self.kappa, b=self.b,
            seed=seed, theta_star=theta_star, keep_top_orderings="oracle" in self.estimators,
        )

    def fit_options(self) -> FitOptions:
        return FitOptions(
            b=self.fit_b if self.fit_b is not None else self.b,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
        )

    def provenance(self) -> str:
        cfg = {k: v for k, v in asdict(self).items() if k not in ("extra", "workers")}
        return json.dumps({"csv_version": CSV_VERSION, **cfg}, sort_keys=True)


def _seed_for(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


def trial_theta(spec: ExperimentSpec, trial: int):
    """Ground truth shared by every n within one trial."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(trial,)))
    return sample_theta(spec.d, spec.b, rng)


def run_cell(spec: ExperimentSpec, n: int, trial: int) -> list[tuple[dict, float]]:
    """All estimator fits on one generated dataset."""
    theta = trial_theta(spec, trial)
    data = generate_canonical(spec.scenario(n, theta, _seed_for(spec.seed, trial, n)))
    opts = spec.fit_options()
    d = spec.d
    fits: list[tuple[str, int, FitResult]] = []
    for est in spec.estimators:
        if est == "grb":
            for M in spec.M_values:
                fits.append((est, M, fit_order_M(data.dataset.with_M(M), opts)))
        elif est == "prb":
            fits.append((est, 0, pairwise_rb_inconsistent(data.dataset, opts)))
        elif est == "oracle":
            fits.append((est, 0, oracle_mle(data.dataset, data.top_orders, opts)))
        else:
            fits.append((est, 0, full_mle_small(data.dataset, opts)))
    rows = []
    for est, M, res in fits:
        err = squared_error(res, theta)
        if not math.isfinite(err):
            raise ArithmeticError("non-finite squared error")
        row = {
            "estimator": est, "M": M, "n": n, "trial": trial,
            "mse": repr(err), "mse_over_d2": repr(err / d**2),
            "iterations": res.iterations, "permutation_terms": res.permutation_terms_evaluated,
        }
        rows.append((row, res.wall_time))
    return rows


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec) -> tuple[str, str]:
    """Run the sweep; returns (results CSV text, timing CSV text).

    Wall-clock timings go to their own table so the results CSV is
    byte-identical across runs with the same seed.
    """
    cells = [(spec, n, t) for n in spec.n_values for t in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell_args, cells))
    else:
        results = [run_cell(*c) for c in cells]

    out, timing = io.StringIO(), io.StringIO()
    for buf in (out, timing):
        buf.write(f"# {spec.provenance()}\n")
        buf.write("# mse is ||theta_hat - theta*||^2; mse_over_d2 divides it by d^2; M = 0 means not applicable\n")
    writer = csv.DictWriter(out, fieldnames=COLUMNS, lineterminator="\n")
    twriter = csv.writer(timing, lineterminator="\n")
    writer.writeheader()
    twriter.writerow(TIMING_COLUMNS)
    for cell in results:
        for row, seconds in cell:
            writer.writerow(row)
            twriter.writerow([row["estimator"], row["M"], row["n"], row["trial"], f"{seconds:.9f}"])
    return out.getvalue(), timing.getvalue()


def read_results(text: str) -> list[dict]:
    """Parse a results CSV (skipping provenance comments) with numeric fields converted."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        rows.append({
            "estimator": rec["estimator"],
            "M": int(rec["M"]),
            "n": int(rec["n"]),
            "trial": int(rec["trial"]),
            "mse": float(rec["mse"]),
            "mse_over_d2": float(rec["mse_over_d2"]),
            "iterations": int(rec["iterations"]),
            "permutation_terms": int(rec["permutation_terms"]),
        })
    return rows
