"""Command-line drivers: cluster, mdl, synth, eval, rank1.

Every command writes into ``--out`` (a directory) and leaves a JSON report
holding the resolved configuration, seed, wall time and library version.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bintensor import BinaryTensor3, as_weight
from .mdl import select_k
from .metrics import cohens_kappa, nmi_joint, relative_similarity
from .rank1 import rank1_approx, rank1_brute, rank1_ptas
from .saboteur import rescore, saboteur, unrestricted_btc
from .synthgen import SynthConfig, gen_instance
from .tnsio import FormatError, parse_tns, preprocess, read_labels, read_model, write_labels, write_model, write_tns

log = logging.getLogger("btclust")

# exit codes per error category
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CONFIG = 4


class ConfigError(ValueError):
    """Invalid flag combination or value, detected before any compute."""


# -- helpers ------------------------------------------------------------------


def _mode_order(mode: int) -> tuple[int, int, int]:
    # put the clustered mode last; the other two keep their relative order
    return tuple(d for d in range(3) if d != mode - 1) + (mode - 1,)


def _load_tensor(args) -> tuple[BinaryTensor3, list[np.ndarray]]:
    X = parse_tns(args.input)
    if args.mode != 3:
        X = X.permute(_mode_order(args.mode))
    try:
        return preprocess(X, args.min_entries)
    except ValueError as exc:
        raise FormatError(f"{args.input}: {exc}") from None


def _config(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, Fraction):
            value = str(value)
        out[key] = value
    return out


def _report(args, started: float, **results) -> dict:
    return {
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "wall_time_s": time.perf_counter() - started,
        "config": _config(args),
        **results,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _write_metrics(path: Path, metrics: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in metrics.items():
            writer.writerow([key, value])


def _check_common(args) -> None:
    for flag, low in (("threads", 1), ("samples", 1), ("min_entries", 0), ("k", 1), ("k_min", 1)):
        value = getattr(args, flag, None)
        if value is not None and value < low:
            raise ConfigError(f"--{flag.replace('_', '-')} must be at least {low}, got {value}")


def _labels_for(path, maps, l: int) -> np.ndarray:
    labels = read_labels(path)
    kept = maps[2]
    if len(labels) != len(kept):
        raise FormatError(f"{path}: {len(labels)} labels for {len(kept)} slices")
    labels = labels[kept >= 0]
    assert len(labels) == l
    return labels


# -- commands -----------------------------------------------------------------


def cmd_cluster(args) -> dict:
    started = time.perf_counter()
    X, maps = _load_tensor(args)
    if not 1 <= args.k <= X.l:
        raise ConfigError(f"--k must lie in 1..{X.l} after preprocessing, got {args.k}")
    algo = unrestricted_btc if args.unrestricted else saboteur
    model = algo(X, args.k, args.samples, args.seed, weight=args.weight,
                 iterative=args.iterative_updates, threads=args.threads)
    out = args.out
    write_model(model, out / "model.txt")
    write_labels(model.assignment, out / "labels.txt")
    metrics = {
        "sim": model.sim,
        "relative_similarity": relative_similarity(X, model),
        "weighted_cost": str(model.cost),
        "k": model.k,
        "rounds": model.rounds,
    }
    _write_metrics(out / "metrics.csv", metrics)
    report = _report(args, started, shape=list(X.shape), ones=X.count(),
                     removed=[int((mp < 0).sum()) for mp in maps],
                     metrics=metrics, resample_sims=list(model.resample_sims))
    _write_json(out / "report.json", report)
    return report


def cmd_mdl(args) -> dict:
    started = time.perf_counter()
    X, _ = _load_tensor(args)
    k_max = min(args.k_max, X.l) if args.k_max is not None else X.l
    if args.k_min > k_max:
        raise ConfigError(f"empty k range {args.k_min}..{k_max}")
    result = select_k(X, range(args.k_min, k_max + 1), args.samples, args.seed,
                      weight=args.weight, iterative=args.iterative_updates, threads=args.threads)
    result.write_csv(args.out / "mdl.csv")
    report = _report(args, started, shape=list(X.shape), best_k=result.best_k,
                     curve=[[rec.k, rec.L_model, rec.L_data, rec.L_total] for rec in result.records])
    _write_json(args.out / "report.json", report)
    return report


def cmd_synth(args) -> dict:
    started = time.perf_counter()
    try:
        cfg = SynthConfig(args.n, args.m, args.l, args.k, args.density,
                          args.p_add, args.p_del, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    inst = gen_instance(cfg)
    write_tns(inst.noisy, args.out / "tensor.tns")
    write_tns(inst.clean, args.out / "clean.tns")
    write_labels(inst.labels, args.out / "labels.txt")
    report = _report(args, started, synth=cfg.to_dict(), bernoulli_p=inst.bernoulli_p,
                     clean_ones=inst.clean.count(), noisy_ones=inst.noisy.count())
    _write_json(args.out / "report.json", report)
    return report


def cmd_eval(args) -> dict:
    started = time.perf_counter()
    X, maps = _load_tensor(args)
    model = read_model(args.model)
    if model.shape != X.shape:
        raise FormatError(f"model shape {model.shape} does not match tensor {X.shape}")
    model = rescore(model, X)
    metrics = {
        "sim": model.sim,
        "relative_similarity": relative_similarity(X, model),
        "weighted_cost": str(model.cost),
        "k": model.k,
    }
    if args.labels is not None:
        truth = _labels_for(args.labels, maps, X.l)
        metrics["kappa"] = cohens_kappa(truth, model.assignment)
        metrics["nmi"] = nmi_joint(truth, model.assignment)
    _write_metrics(args.out / "metrics.csv", metrics)
    report = _report(args, started, metrics=metrics)
    _write_json(args.out / "report.json", report)
    return report


def cmd_rank1(args) -> dict:
    started = time.perf_counter()
    X = parse_tns(args.input)
    if X.l != 1:
        raise FormatError(f"{args.input}: rank1 needs a single slice (l = 1), got l = {X.l}")
    M = X.frontal_slice(0)
    if args.method == "approx":
        pair = rank1_approx(M, args.weight)
    elif args.method == "ptas":
        pair = rank1_ptas(M, args.eps, args.seed, w=args.weight)
    else:
        pair = rank1_brute(M, args.weight)
    report = _report(args, started, shape=[X.n, X.m], sim=pair.sim, candidates=pair.candidates,
                     a=(np.flatnonzero(pair.a) + 1).tolist(), b=(np.flatnonzero(pair.b) + 1).tolist())
    _write_json(args.out / "rank1.json", report)
    return report


# -- parser -------------------------------------------------------------------


def _weight(text: str) -> Fraction:
    try:
        return as_weight(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def outdir(p):
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    def tensor_input(p):
        p.add_argument("input", type=Path, help="coordinate (tns) tensor file")
        p.add_argument("--mode", type=int, choices=(1, 2, 3), default=3,
                       help="mode whose slices are clustered")
        p.add_argument("--min-entries", type=int, default=1,
                       help="prune slices with fewer ones, in every mode, to a fixpoint")

    def algorithm(p):
        p.add_argument("--samples", type=int, default=20, help="number of resamples r")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--weight", type=_weight, default=Fraction(1),
                       help="false-negative weight w >= 1 (e.g. 2 or 3/2)")
        p.add_argument("--iterative-updates", action="store_true")

    p = sub.add_parser("cluster", help="cluster the slices of a tensor")
    tensor_input(p)
    p.add_argument("--k", type=int, required=True)
    algorithm(p)
    p.add_argument("--unrestricted", action="store_true", help="arbitrary binary centroids")
    outdir(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("mdl", help="select the number of clusters by description length")
    tensor_input(p)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=None)
    algorithm(p)
    outdir(p)
    p.set_defaults(func=cmd_mdl)

    p = sub.add_parser("synth", help="generate a planted-cluster tensor")
    p.add_argument("--n", type=int, default=70)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--l", type=int, default=20)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--p-add", type=float, default=0.10)
    p.add_argument("--p-del", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    outdir(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score a saved model on a tensor")
    tensor_input(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--labels", type=Path, default=None, help="ground-truth labels, one per slice")
    p.add_argument("--seed", type=int, default=None)
    outdir(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank1", help="rank-1 decomposition of a single-slice tensor")
    p.add_argument("input", type=Path)
    p.add_argument("--method", choices=("approx", "ptas", "brute"), default="approx")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--weight", type=_weight, default=Fraction(1))
    p.add_argument("--seed", type=int, default=0)
    outdir(p)
    p.set_defaults(func=cmd_rank1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_common(args)
        args.out.mkdir(parents=True, exist_ok=True)
        args.func(args)
    except ConfigError as exc:
        print(f"btclust: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        print(f"btclust: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"btclust: invalid request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("internal failure", exc_info=True)
        print(f"btclust: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
