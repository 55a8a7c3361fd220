"""Command-line front end.

Subcommands: generate, ingest, fit, diagnose, experiment. Exit codes are
0 on success, 2 for configuration errors, 3 for data errors and 4 for
numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Sequence

from . import dataio
from .diagnostics import diagnose
from .errors import ConfigError, DataError, NumericalError
from .estimator import FitOptions, fit_order_M, full_mle_small, oracle_mle, pairwise_rb_inconsistent
from .experiment import ESTIMATORS, ExperimentSpec, run_experiment
from .poset import Observation
from .synth import ScenarioConfig, generate_canonical, tradeoff_blocks

log = logging.getLogger("rankbreak")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

DEFAULTS = {
    "scenario": "canonical",
    "d": 16,
    "n": 1000,
    "kappa": None,
    "blocks": "1,2,3",
    "b": 2.0,
    "c": 0.5,
    "seed": 0,
    "M": "3",
    "n_values": "1000",
    "trials": 20,
    "estimators": "grb",
    "max_iters": 5000,
    "grad_tol": 1e-7,
    "workers": 1,
}


def int_list(text: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def resolve(args: argparse.Namespace, keys: Sequence[str]) -> dict:
    """Effective settings: flags beat the config file, which beats defaults."""
    from_file = {}
    if getattr(args, "config", None):
        try:
            from_file = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in from_file:
            out[key] = from_file[key]
        else:
            out[key] = DEFAULTS.get(key)
    return out


# -- generate -----------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = resolve(args, ["scenario", "d", "n", "kappa", "blocks", "b", "c", "seed"])
    if cfg["scenario"] == "tradeoff":
        blocks = tradeoff_blocks(cfg["d"], cfg["c"])
        kappa = None
    elif cfg["scenario"] == "canonical":
        blocks = int_list(cfg["blocks"])
        kappa = cfg["kappa"]
    else:
        raise ConfigError(f"unknown scenario {cfg['scenario']!r}")
    config = ScenarioConfig(
        d=cfg["d"], n=cfg["n"], block_sizes=blocks, kappa=kappa, b=cfg["b"],
        seed=cfg["seed"], keep_top_orderings=args.keep_top_orderings,
    )
    data = generate_canonical(config)
    out = Path(args.output)
    dataio.write_dataset(out, data.dataset.observations)
    dataio.write_truth(dataio.sidecar(out, "truth"), data.theta_star)
    if data.top_orders is not None:
        dataio.write_orderings(dataio.sidecar(out, "orderings"), data.top_orders)
    hist = Counter(e.m for e in data.dataset.edges)
    print(json.dumps({
        "n": data.dataset.n,
        "d": config.d,
        "edges_by_m": {str(m): hist[m] for m in sorted(hist)},
        "config": {**cfg, "blocks": list(blocks)},
    }))
    return 0


# -- ingest -------------------------------------------------------------------


def coarsen(order: Sequence[int], m: int, protocol: str) -> Observation:
    """Drop the known ordering inside groups of a full ranking (best first)."""
    kappa = len(order)
    if m < 1 or m >= kappa and protocol == "split":
        raise ConfigError(f"block size m = {m} invalid for a ranking of {kappa} items")
    if protocol == "split":
        blocks = [order[:m], order[m:]]
    elif protocol == "blocks":
        full = kappa // m
        blocks = [order[k * m:(k + 1) * m] for k in range(full)]
        if full * m < kappa:
            blocks.append(order[full * m:])
    else:
        raise ConfigError(f"unknown protocol {protocol!r}")
    return Observation.from_top_down(blocks)


def cmd_ingest(args: argparse.Namespace) -> int:
    rows = []
    with open(args.input, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            labels = [x.strip() for x in row if x.strip()]
            if not labels:
                continue
            if len(set(labels)) != len(labels):
                raise DataError(f"{args.input}:{lineno}: duplicate items in ranking")
            if len(labels) < 2:
                raise DataError(f"{args.input}:{lineno}: a ranking needs at least two items")
            rows.append(labels)
    if not rows:
        raise DataError(f"{args.input}: no rankings")
    label_list = sorted({x for row in rows for x in row})
    ids = {lab: k for k, lab in enumerate(label_list)}
    observations = [coarsen([ids[x] for x in row], args.m, args.protocol) for row in rows]
    out = Path(args.output)
    dataio.write_dataset(out, observations)
    dataio.write_labels(dataio.sidecar(out, "labels"), label_list)
    print(json.dumps({"n": len(observations), "d": len(label_list), "protocol": args.protocol, "m": args.m}))
    return 0


# -- fit / diagnose -----------------------------------------------------------


def cmd_fit(args: argparse.Namespace) -> int:
    M = int(args.M) if args.M is not None else None
    dataset = dataio.read_dataset(args.dataset, d=args.d, M=M)
    opts = FitOptions(
        b=args.b if args.b is not None else 5.0,
        max_iters=args.max_iters or DEFAULTS["max_iters"],
        grad_tol=args.grad_tol or DEFAULTS["grad_tol"],
        workers=args.workers or 1,
    )
    if args.estimator == "grb":
        res = fit_order_M(dataset, opts)
    elif args.estimator == "prb":
        res = pairwise_rb_inconsistent(dataset, opts)
    elif args.estimator == "full_mle":
        res = full_mle_small(dataset, opts)
    else:
        path = args.orderings or dataio.sidecar(args.dataset, "orderings")
        res = oracle_mle(dataset, dataio.read_orderings(path), opts)
    payload = {
        "theta": res.theta_hat.values.tolist(),
        "b": res.theta_hat.b,
        "estimator": args.estimator,
        "M": M,
        "final_value": res.final_value,
        "iterations": res.iterations,
        "converged": res.converged,
        "grad_norm": res.grad_norm,
        "seconds": res.wall_time,
        "permutation_terms": res.permutation_terms_evaluated,
        "connected": res.connected,
    }
    text = json.dumps(payload)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    if not res.converged:
        log.warning("optimizer stopped after %d iterations without converging", res.iterations)
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    M = int(args.M) if args.M is not None else None
    dataset = dataio.read_dataset(args.dataset, d=args.d, M=M)
    b = args.b
    if b is None:
        truth = dataio.sidecar(args.dataset, "truth")
        b = dataio.read_truth(truth).b if truth.exists() else DEFAULTS["b"]
    text = diagnose(dataset, b).to_json()
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


# -- experiment ---------------------------------------------------------------


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = resolve(args, ["d", "kappa", "blocks", "b", "seed", "M", "n_values", "trials",
                         "estimators", "max_iters", "grad_tol", "workers"])
    estimators = cfg["estimators"]
    if isinstance(estimators, str):
        estimators = [e.strip() for e in estimators.split(",") if e.strip()]
    spec = ExperimentSpec(
        d=cfg["d"], kappa=cfg["kappa"], block_sizes=int_list(cfg["blocks"]), b=cfg["b"],
        seed=cfg["seed"], M_values=int_list(cfg["M"]), n_values=int_list(cfg["n_values"]),
        trials=cfg["trials"], estimators=tuple(estimators), max_iters=cfg["max_iters"],
        grad_tol=cfg["grad_tol"], workers=cfg["workers"],
    )
    results, timing = run_experiment(spec)
    out = Path(args.output)
    out.write_text(results, encoding="utf-8")
    timing_path = Path(args.timing_output) if args.timing_output else out.with_name(f"{out.stem}.timing.csv")
    timing_path.write_text(timing, encoding="utf-8")
    print(json.dumps({"rows": results.count("\n") - 3, "output": str(out), "timing": str(timing_path)}))
    return 0


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankbreak", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a synthetic dataset")
    gen.add_argument("--config")
    gen.add_argument("--scenario", choices=["canonical", "tradeoff"])
    gen.add_argument("--d", type=int)
    gen.add_argument("--n", type=int)
    gen.add_argument("--kappa", type=int)
    gen.add_argument("--blocks", help="top block sizes, most preferred first, e.g. 1,2,3")
    gen.add_argument("--b", type=float)
    gen.add_argument("--c", type=float, help="tradeoff scenario constant")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--keep-top-orderings", action="store_true")
    gen.add_argument("--output", required=True)
    gen.set_defaults(func=cmd_generate)

    ing = sub.add_parser("ingest", help="coarsen full rankings from a CSV file")
    ing.add_argument("input")
    ing.add_argument("--m", type=int, required=True)
    ing.add_argument("--protocol", choices=["split", "blocks"], default="split")
    ing.add_argument("--output", required=True)
    ing.set_defaults(func=cmd_ingest)

    for name, func in (("fit", cmd_fit), ("diagnose", cmd_diagnose)):
        p = sub.add_parser(name)
        p.add_argument("dataset")
        p.add_argument("--d", type=int)
        p.add_argument("--M", type=int)
        p.add_argument("--b", type=float)
        p.add_argument("--output")
        if name == "fit":
            p.add_argument("--estimator", choices=ESTIMATORS, default="grb")
            p.add_argument("--orderings")
            p.add_argument("--max-iters", dest="max_iters", type=int)
            p.add_argument("--grad-tol", dest="grad_tol", type=float)
            p.add_argument("--workers", type=int)
        p.set_defaults(func=func)

    exp = sub.add_parser("experiment", help="run a seeded estimator sweep")
    exp.add_argument("--config")
    exp.add_argument("--d", type=int)
    exp.add_argument("--kappa", type=int)
    exp.add_argument("--blocks")
    exp.add_argument("--b", type=float)
    exp.add_argument("--seed", type=int)
    exp.add_argument("--M")
    exp.add_argument("--n", dest="n_values")
    exp.add_argument("--trials", type=int)
    exp.add_argument("--estimators")
    exp.add_argument("--max-iters", dest="max_iters", type=int)
    exp.add_argument("--grad-tol", dest="grad_tol", type=float)
    exp.add_argument("--workers", type=int)
    exp.add_argument("--output", required=True)
    exp.add_argument("--timing-output")
    exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
