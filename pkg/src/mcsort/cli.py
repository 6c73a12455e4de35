"""Command-line interface: ``mcsort {train,predict,evaluate,ttest}``.

Exit codes: 0 success, 2 data or model-file error, 3 inconsistent data
(no nonnegative centroid margin), 4 interaction guard (too many criteria).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .classify import METHODS, ScoredReferenceSet, check_k, score_batch
from .dataset import DatasetError, infer_scales, load_performances, load_table
from .encoding import count_clamped
from .evaluate import (ExperimentConfig, GridSpec, cv_table, paired_t_test, paper_grid,
                       quick_grid, repeat_seeds, cross_validate, mean_summary)
from .dataset import stratified_folds
from .learner import (POLICIES, InconsistentData, StructureGuardError, TrainConfig,
                      report_model, train)
from .modelfile import ModelFile, ModelFileError, build_timestamp

EXIT_DATA, EXIT_INFEASIBLE, EXIT_GUARD = 2, 3, 4

METRIC_KEYS = {"accuracy": "accuracy", "precision": "macro_precision",
               "recall": "macro_recall", "f_measure": "macro_f"}


# --------------------------------------------------------------------------- flag parsing

def _directions(text, n):
    if text is None:
        return None
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise DatasetError(f"--directions needs 1 or {n} entries, got {len(parts)}")
    return tuple(parts)


def _gamma(text, n):
    parts = [int(p) for p in str(text).split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) != n:
        raise DatasetError(f"--gamma needs 1 or {n} entries, got {len(parts)}")
    return tuple(parts)


def _load(args):
    order = args.label_order.split(",") if getattr(args, "label_order", None) else None
    return load_table(args.data, label_column=args.label_col, id_column=args.id_col, label_order=order)


def _add_data_flags(p, labelled=True):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    if labelled:
        p.add_argument("--label-col", default=None, help="label column name or index (default: last)")
        p.add_argument("--label-order", default=None,
                       help="comma-separated worst-to-best label values (needed for text labels)")
    p.add_argument("--id-col", default=None, help="identifier column name or index")


def _add_model_flags(p):
    p.add_argument("--directions", default=None, help="gain/cost, one value or one per criterion")
    p.add_argument("--gamma", default="2", help="pieces per marginal, one value or one per criterion")
    p.add_argument("--interactions", choices=("none", "product", "minimum"), default="none")
    p.add_argument("--policy", choices=POLICIES, default="both")
    p.add_argument("--c1", type=float, default=1e-3)
    p.add_argument("--c2", type=float, default=1e-3)
    p.add_argument("--method", choices=METHODS, default="m2")
    p.add_argument("--k", type=int, default=None, help="neighbours for m4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcsort", description="Sorting models with interacting criteria")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", default="model.json")

    p = sub.add_parser("predict", help="assign alternatives with a trained model")
    p.add_argument("--model", required=True)
    _add_data_flags(p, labelled=False)
    p.add_argument("--method", choices=METHODS, default=None, help="default: method stored in the model")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output (default: stdout)")

    p = sub.add_parser("evaluate", help="cross-validate on a labelled dataset")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--grid", choices=("none", "quick", "paper"), default="none")
    p.add_argument("--baseline", choices=("choquet",), default=None)
    p.add_argument("--out", default=None, help="JSON report path; a .txt table is written beside it")

    p = sub.add_parser("ttest", help="one-tailed paired t-test of two evaluate reports (H1: a > b)")
    p.add_argument("results_a")
    p.add_argument("results_b")
    p.add_argument("--metric", choices=tuple(METRIC_KEYS), default="accuracy")
    return parser


# --------------------------------------------------------------------------- commands

def cmd_train(args) -> int:
    table = _load(args)
    dirs = _directions(args.directions, table.n_criteria)
    scales = infer_scales(table, _gamma(args.gamma, table.n_criteria), dirs)
    model = train(table, scales, TrainConfig(form=args.interactions, policy=args.policy,
                                             C1=args.c1, C2=args.c2, jobs=max(1, args.jobs)))
    values = model.values(table.performances)
    refs = ScoredReferenceSet.from_arrays(values, table.labels, table.q)
    if args.method == "m4" and args.k is not None:
        check_k(refs, args.k)
    mf = ModelFile(model=model, criteria=table.criterion_names, references=refs,
                   reference_ids=table.alternatives, policy=args.policy, seed=args.seed,
                   timestamp=build_timestamp(), method=args.method, K=args.k)
    mf.save(args.out)
    print(f"structure: {model.structure.describe(table.criterion_names)}")
    for line in report_model(model).lines(table.criterion_names):
        print(line)
    print(f"model written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    mf = ModelFile.load(args.model)
    ids, perf = load_performances(args.data, mf.criteria, args.id_col)
    method = args.method or mf.method
    K = args.k if args.k is not None else (mf.K if method == mf.method else None)
    if method == "m4" and K is None:
        raise DatasetError("K required for method m4 (pass --k)")
    clamped = count_clamped(mf.model.scales, perf)
    if clamped:
        print(f"warning: {clamped} performance value(s) outside the training range were clamped",
              file=sys.stderr)
    values = mf.model.values(perf)
    scores = score_batch(method, mf.references, values, K)
    classes = np.argmax(scores, axis=1) + 1
    labels = mf.model.label_values
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["id", "value", "class", *[f"score_{lab}" for lab in labels]])
        for i, ident in enumerate(ids):
            w.writerow([ident, repr(float(values[i])), labels[classes[i] - 1],
                        *[repr(float(s)) for s in scores[i]]])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _grid(args, methods) -> GridSpec:
    forms = (args.interactions,)
    if args.grid == "paper":
        g = paper_grid(methods, forms)
    elif args.grid == "quick":
        g = quick_grid(methods, forms)
    else:
        return None
    if args.k is not None:
        g = replace(g, K=(args.k,))
    return g


def _run(table, config, args, grid):
    runs = []
    for s in repeat_seeds(args.seed, args.repeats):
        folds = stratified_folds(table, args.folds, s)
        runs.append(cross_validate(table, config, folds, grid, jobs=max(1, args.jobs)))
    flat = [f.metrics for r in runs for f in r.folds]
    return {
        "config": {k: v for k, v in asdict(config).items()},
        "mean": mean_summary(flat),
        "fold_values": {name: [getattr(m, key) for m in flat] for name, key in METRIC_KEYS.items()},
        "runs": [r.to_dict() for r in runs],
    }


def _ttest_dict(res) -> dict:
    return {"t": res.t if math.isfinite(res.t) else None, "p": res.p, "df": res.df,
            "degenerate": res.degenerate}


def cmd_evaluate(args) -> int:
    table = _load(args)
    dirs = _directions(args.directions, table.n_criteria)
    gamma = _gamma(args.gamma, table.n_criteria)
    if args.repeats < 1:
        raise DatasetError("--repeats must be at least 1")
    config = ExperimentConfig(model="value", form=args.interactions, policy=args.policy, gamma=gamma,
                              directions=dirs, method=args.method, K=args.k, C1=args.c1, C2=args.c2)
    if args.grid == "none" and args.method == "m4" and args.k is None:
        raise DatasetError("K required for method m4 (pass --k)")
    grid = _grid(args, (args.method,))
    report = {"data": str(args.data), "folds": args.folds, "repeats": args.repeats, "seed": args.seed,
              "grid": args.grid, "results": {"value": _run(table, config, args, grid)}}
    if args.baseline == "choquet":
        base = replace(config, model="choquet", form="none")
        report["results"]["choquet"] = _run(table, base, args, grid)
        a = report["results"]["value"]["fold_values"]["accuracy"]
        b = report["results"]["choquet"]["fold_values"]["accuracy"]
        report["paired_accuracy"] = {"value": a, "choquet": b}
        report["ttest"] = _ttest_dict(paired_t_test(a, b))
    text = cv_table({name: r["mean"] for name, r in report["results"].items()})
    if "ttest" in report:
        tt = report["ttest"]
        text += f"\n\none-tailed paired t-test (value > choquet): t = {tt['t']}, p = {tt['p']:.4g}"
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        Path(args.out).with_suffix(".txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    print(f"mean accuracy: {report['results']['value']['mean']['accuracy']:.4f}")
    return 0


def _fold_values(path, metric) -> list:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return doc["results"]["value"]["fold_values"][metric]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"cannot read fold values from {path}: {exc}") from None


def cmd_ttest(args) -> int:
    a = _fold_values(args.results_a, args.metric)
    b = _fold_values(args.results_b, args.metric)
    res = paired_t_test(a, b)
    print(json.dumps({"metric": args.metric, **_ttest_dict(res)}, sort_keys=True))
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "ttest": cmd_ttest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except StructureGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InconsistentData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DatasetError, ModelFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
