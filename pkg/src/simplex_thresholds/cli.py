"""Command-line interface.

Exit codes: 0 success, 2 input or configuration error, 3 candidate budget
exceeded, 4 numerical failure during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .data import FormatError, load_csv, load_mnist, read_predictions, synth_blobs, write_csv, write_predictions
from .metrics import Score, ScoreSpec, confusion_table, table_objective
from .regions import BoundaryError, TiePolicy, classify_batch
from .simplex import DirichletParams, barycenter, grid_size
from .sol_loss import SolConfig, hoeffding_samples
from .trainer import NonFiniteLoss, TrainConfig, evaluate, forward, train
from .tuning import BudgetExceeded, tune_grid, tune_mc

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4
SCORES = {"accuracy": Score.ACCURACY, "f1": Score.F1, "tss": Score.TSS}
TRAIN_SCORES = {**SCORES, "precision": Score.PRECISION, "recall": Score.RECALL, "linear": Score.LINEAR}

log = logging.getLogger("simplex_thresholds")


class UsageError(Exception):
    pass


def _fmt_tau(tau) -> str:
    return "(" + " ".join(f"{v:.2f}" for v in tau) + ")"


def _split_block(spec: ScoreSpec, labels, probs, tau, tie) -> dict:
    m = probs.shape[1]
    base = confusion_table(labels, classify_batch(probs, barycenter(m), tie), m)
    tuned = confusion_table(labels, classify_batch(probs, tau, tie), m)
    a, t = float(table_objective(spec, base)), float(table_objective(spec, tuned))
    return {
        "n": int(len(labels)),
        "argmax": {"score": a, "confusion": base.tolist()},
        "tuned": {"score": t, "confusion": tuned.tolist()},
        "delta": t - a,
    }


def recompute_score(score: str, confusion) -> float:
    """Score from a report's ``[[tn, fp, fn, tp], ...]`` table."""
    return float(table_objective(ScoreSpec(Score(score)), np.asarray(confusion)))


def _print_table(score_name: str, splits: dict, tau) -> None:
    print(f"{'Metric':<10}{'Set':<12}{'Argmax':>9}{'Tuned':>9}{'Delta':>9}")
    for name, blk in splits.items():
        print(
            f"{score_name:<10}{name:<12}{blk['argmax']['score']:>9.4f}"
            f"{blk['tuned']['score']:>9.4f}{blk['delta']:>9.4f}"
        )
    print(f"tau* = {_fmt_tau(tau)}")


def _write_report(path, report: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def cmd_tune(args) -> int:
    probs, labels = read_predictions(args.predictions)
    m = probs.shape[1]
    spec = ScoreSpec(SCORES[args.score])
    tie = TiePolicy(args.tie)
    start = time.perf_counter()
    if args.mode == "grid":
        if args.k is None:
            raise UsageError("--mode grid requires --k")
        res = tune_grid(probs, labels, spec, args.k, tie)
        grid_points = grid_size(m, args.k)
    else:
        if args.samples is None:
            raise UsageError("--mode mc requires --samples")
        res = tune_mc(probs, labels, spec, DirichletParams.symmetric(m, args.alpha), args.samples, args.seed, tie)
        grid_points = None
    splits = {"tuning": _split_block(spec, labels, probs, res.best_tau, tie)}
    if args.test:
        tprobs, tlabels = read_predictions(args.test)
        if tprobs.shape[1] != m:
            raise FormatError(f"{args.test}: {tprobs.shape[1]} classes, tuning file has {m}")
        splits["test"] = _split_block(spec, tlabels, tprobs, res.best_tau, tie)
    report = {
        "command": "tune",
        "argv": args.argv,
        "seed": args.seed,
        "score": spec.name.value,
        "mode": args.mode,
        "k": args.k,
        "samples": args.samples,
        "alpha": args.alpha if args.mode == "mc" else None,
        "m": m,
        "grid_points": grid_points,
        "n_candidates": res.n_candidates,
        "barycenter_injected": res.n_candidates != (grid_points if args.mode == "grid" else args.samples),
        "tau_star": res.best_tau.tolist(),
        "splits": splits,
        "elapsed_seconds": time.perf_counter() - start,
    }
    _print_table(args.score, splits, res.best_tau)
    _write_report(args.out, report)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    probs, labels = read_predictions(args.predictions)
    if probs.shape[1] != 3:
        raise UsageError(f"heatmaps need exactly 3 classes, {args.predictions} has {probs.shape[1]}")
    spec = ScoreSpec(SCORES[args.score])
    res = tune_grid(probs, labels, spec, args.k, TiePolicy(args.tie))
    lines = ["t1,t2,t3,score"]
    for tau, s in zip(res.candidates, res.scores):
        lines.append(",".join(format(v, ".17g") for v in (*tau, s)))
    lines.append(f"# argmax row {res.barycenter_index + 1}: score {res.baseline_argmax_score:.17g}")
    lines.append(
        f"# best row {res.best_index + 1}: tau {','.join(format(v, '.17g') for v in res.best_tau)}"
        f" score {res.best_score:.17g}"
    )
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(res.scores)} rows to {args.out}; best {args.score} {res.best_score:.4f} at {_fmt_tau(res.best_tau)}")
    return EXIT_OK


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _resolve_dataset(args):
    if args.mnist:
        return load_mnist(args.mnist, n_validation=args.mnist_validation)
    if args.csv_train:
        if not (args.csv_val and args.csv_test):
            raise UsageError("--csv-train needs --csv-val and --csv-test")
        train_split = load_csv(args.csv_train, "train")
        m = train_split.m
        return train_split, load_csv(args.csv_val, "validation", m), load_csv(args.csv_test, "test", m)
    if args.synth_counts:
        counts = _parse_ints(args.synth_counts)
        return synth_blobs(len(counts), counts, args.synth_d, args.synth_separation, args.seed)
    raise UsageError("choose a dataset: --mnist DIR, --csv-train/--csv-val/--csv-test, or --synth-counts")


def cmd_sol_train(args) -> int:
    data = _resolve_dataset(args)
    m = data[0].m
    hidden = _parse_ints(args.hidden)
    sol = None
    if args.loss == "multisol":
        sol = SolConfig(
            alpha=DirichletParams.symmetric(m, args.alpha),
            lam=args.lam,
            n_samples=args.samples if args.samples else min(hoeffding_samples(0.01, 0.05), 4096),
            score_spec=ScoreSpec(TRAIN_SCORES[args.score]),
        )
    config = TrainConfig(
        loss=args.loss,
        sol=sol,
        lr=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        class_weight=args.class_weight,
    )
    start = time.perf_counter()
    result = train(data, hidden, config)
    val = evaluate(result.params, data[1])
    test = evaluate(result.params, data[2])
    report = {
        "command": "sol-train",
        "argv": args.argv,
        "seed": args.seed,
        "loss": args.loss,
        "alpha": args.alpha if sol else None,
        "lambda": args.lam if sol else None,
        "samples": sol.n_samples if sol else None,
        "score": args.score if sol else None,
        "architecture": [data[0].d, *hidden, m],
        "best_epoch": result.best_epoch,
        "history": result.history,
        "validation": {"accuracy": val["accuracy"], "macro_f1": val["macro_f1"], "confusion": val["table"].tolist()},
        "test": {"accuracy": test["accuracy"], "macro_f1": test["macro_f1"], "confusion": test["table"].tolist()},
        "elapsed_seconds": time.perf_counter() - start,
    }
    print(f"{'Set':<12}{'Accuracy':>10}{'Macro F1':>10}")
    print(f"{'validation':<12}{val['accuracy']:>10.4f}{val['macro_f1']:>10.4f}")
    print(f"{'test':<12}{test['accuracy']:>10.4f}{test['macro_f1']:>10.4f}")
    print(f"best epoch {result.best_epoch} of {len(result.history)}")
    if args.export_predictions:
        for split in data[1:]:
            path = f"{args.export_predictions}_{split.tag}.csv"
            write_predictions(path, forward(result.params, split.features), split.labels)
            print(f"wrote {path}")
    _write_report(args.out, report)
    return EXIT_OK


def cmd_sample_size(args) -> int:
    try:
        n = hoeffding_samples(args.epsilon, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(n)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    counts = _parse_ints(args.counts)
    if args.m is not None and args.m != len(counts):
        raise UsageError(f"--m {args.m} does not match {len(counts)} class counts")
    try:
        splits = synth_blobs(len(counts), counts, args.d, args.separation, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for split in splits:
        path = f"{args.out}_{split.tag}.csv"
        write_csv(path, split)
        print(f"wrote {path} ({split.n} rows, class counts {split.counts().tolist()})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simplex-thresholds", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tune", help="tune a multidimensional threshold on a prediction CSV")
    t.add_argument("predictions", help="tuning split (validation by convention): y,p1,...,pm")
    t.add_argument("--test", help="held-out prediction CSV evaluated at the tuned threshold")
    t.add_argument("--score", choices=sorted(SCORES), default="f1")
    t.add_argument("--mode", choices=["grid", "mc"], default="grid")
    t.add_argument("--k", type=int, help="grid resolution (grid mode)")
    t.add_argument("--samples", type=int, help="Dirichlet candidates (mc mode)")
    t.add_argument("--alpha", type=float, default=1.0, help="symmetric Dirichlet concentration (mc mode)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--tie", choices=["lowest", "error"], default="lowest")
    t.add_argument("--out", help="JSON report path")
    t.set_defaults(func=cmd_tune)

    h = sub.add_parser("heatmap", help="score every grid threshold of a 3-class prediction CSV")
    h.add_argument("predictions")
    h.add_argument("--score", choices=sorted(SCORES), default="f1")
    h.add_argument("--k", type=int, default=200)
    h.add_argument("--tie", choices=["lowest", "error"], default="lowest")
    h.add_argument("--out", required=True, help="CSV path")
    h.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("sol-train", help="train the MLP with weighted CE or MultiSOL")
    s.add_argument("--mnist", help="directory holding the four MNIST IDX files")
    s.add_argument("--mnist-validation", type=int, default=10000)
    s.add_argument("--csv-train")
    s.add_argument("--csv-val")
    s.add_argument("--csv-test")
    s.add_argument("--synth-counts", help="per-class counts, e.g. 500,400,50")
    s.add_argument("--synth-d", type=int, default=2)
    s.add_argument("--synth-separation", type=float, default=5.0)
    s.add_argument("--loss", choices=["wce", "multisol"], default="multisol")
    s.add_argument("--alpha", type=float, default=20.0)
    s.add_argument("--lambda", dest="lam", type=float, default=20.0)
    s.add_argument("--samples", type=int, help="threshold draws (default: Hoeffding N for eps=0.01, delta=0.05, capped at 4096)")
    s.add_argument("--score", choices=sorted(TRAIN_SCORES), default="f1")
    s.add_argument("--hidden", default="128,64")
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--batch-size", type=int, default=128)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--patience", type=int, default=5)
    s.add_argument("--class-weight", choices=["balanced", "none"], default="balanced")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--export-predictions", metavar="PREFIX", help="write PREFIX_validation.csv and PREFIX_test.csv")
    s.add_argument("--out", help="JSON report path")
    s.set_defaults(func=cmd_sol_train)

    n = sub.add_parser("sample-size", help="Hoeffding threshold-sample count")
    n.add_argument("--epsilon", type=float, required=True)
    n.add_argument("--delta", type=float, required=True)
    n.set_defaults(func=cmd_sample_size)

    g = sub.add_parser("gen-data", help="write synthetic Gaussian-blob train/validation/test CSVs")
    g.add_argument("--m", type=int)
    g.add_argument("--counts", required=True, help="per-class counts, e.g. 500,400,50")
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--separation", type=float, default=5.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output prefix")
    g.set_defaults(func=cmd_gen_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    args.argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, FormatError, BoundaryError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
