"""Command-line interface: index, run, synth, eval, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import ann
from .entmax import DiagnosticTable, spearman
from .errors import DiagnosticError, EngineError
from .evaluation import accuracy, label_weighted_f1
from .pipeline import RunConfig, run_pipeline
from .synth import SyntheticSpec, generate_synthetic
from .vecstore import load_store

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weaklabel",
        description=(
            "Pseudo-labeling engine: retrieve class-relevant documents from an "
            "external corpus, select a diverse subset, and train a classifier "
            "chosen by maximum induced entropy."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist an IVF index")
    p_index.add_argument("--store", required=True, help="FCEM file to index")
    p_index.add_argument("--clusters", type=int, default=ann.DEFAULT_CLUSTERS)
    p_index.add_argument("--seed", type=int, default=0)
    p_index.add_argument("--out", required=True, help="output .fcix path")

    p_run = sub.add_parser("run", help="run the full pipeline")
    p_run.add_argument("--config", help="JSON config file; flags override it")
    p_run.add_argument("--task")
    p_run.add_argument("--external")
    p_run.add_argument("--classes")
    p_run.add_argument("--grid-n", help="comma-separated, e.g. 100,200,300")
    p_run.add_argument("--grid-m", help="comma-separated, e.g. 300,500,800")
    p_run.add_argument("--seed-count", type=int)
    p_run.add_argument("--index", choices=["exact", "ivf", "auto"])
    p_run.add_argument("--clusters", type=int)
    p_run.add_argument("--nprobe", type=int)
    p_run.add_argument("--classifier", choices=["linear", "centroid"])
    p_run.add_argument(
        "--variant", choices=["standard", "external", "no-facility"]
    )
    p_run.add_argument("--other-class", action="store_true", default=None)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help="output directory")

    p_synth = sub.add_parser("synth", help="generate synthetic fixture corpora")
    p_synth.add_argument("--spec", required=True, help="JSON spec file")
    p_synth.add_argument("--out", required=True, help="output directory")

    p_eval = sub.add_parser("eval", help="metrics from predictions and gold labels")
    p_eval.add_argument("--pred", required=True, help="JSON array of labels")
    gold = p_eval.add_mutually_exclusive_group(required=True)
    gold.add_argument("--gold", help="JSON array of labels")
    gold.add_argument("--gold-store", help="FCEM file whose sidecar has labels")
    p_eval.add_argument("--out", help="write metrics JSON here (default stdout)")

    p_report = sub.add_parser(
        "report", help="entropy/accuracy CSV from a saved grid report"
    )
    p_report.add_argument("--grid-report", required=True)
    p_report.add_argument("--out", required=True, help="output CSV path")

    return parser


def _parse_grid(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


_CLASSIFIER_NAMES = {"linear": "linear-softmax", "centroid": "nearest-centroid"}


def _cmd_index(args: argparse.Namespace) -> int:
    store = load_store(args.store)
    index = ann.build_ivf_index(store, n_clusters=args.clusters, seed=args.seed)
    ann.save_ivf_index(index, args.out)
    sizes = [len(rows) for rows in index.inverted_lists]
    print(
        f"indexed {store.count} docs into {index.n_clusters} clusters "
        f"(list sizes {min(sizes)}..{max(sizes)}) -> {args.out}"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    settings: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            settings.update(json.load(f))
    overrides = {
        "task_path": args.task,
        "external_path": args.external,
        "classes_path": args.classes,
        "grid_n": _parse_grid(args.grid_n) if args.grid_n else None,
        "grid_m": _parse_grid(args.grid_m) if args.grid_m else None,
        "seed_count": args.seed_count,
        "index_kind": args.index,
        "n_clusters": args.clusters,
        "nprobe": args.nprobe,
        "classifier": _CLASSIFIER_NAMES.get(args.classifier),
        "variant": args.variant,
        "other_class": args.other_class,
        "seed": args.seed,
        "out_dir": args.out,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig.from_dict(settings)
    report = run_pipeline(config)
    print(
        f"selected n={report.selected['n']} m={report.selected['m']} "
        f"entropy={report.selected['entropy']:.6f}"
    )
    if report.metrics is not None:
        print(
            f"accuracy={report.metrics['accuracy']:.4f} "
            f"weighted_f1={report.metrics['label_weighted_f1']:.4f}"
        )
    print(f"artifacts in {config.out_dir}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    with open(args.spec, encoding="utf-8") as f:
        spec = SyntheticSpec(**json.load(f))
    paths = generate_synthetic(spec, args.out)
    print(f"wrote {paths.task_path}, {paths.external_path}, {paths.classes_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    with open(args.pred, encoding="utf-8") as f:
        preds = np.asarray(json.load(f), dtype=np.int64)
    if args.gold:
        with open(args.gold, encoding="utf-8") as f:
            gold = np.asarray(json.load(f), dtype=np.int64)
    else:
        store = load_store(args.gold_store)
        if not store.has_full_gold:
            raise DiagnosticError(f"{args.gold_store} has incomplete gold labels")
        gold = np.asarray(store.gold_labels, dtype=np.int64)
    metrics = {
        "accuracy": accuracy(preds, gold),
        "label_weighted_f1": label_weighted_f1(preds, gold),
    }
    payload = json.dumps(metrics, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    with open(args.grid_report, encoding="utf-8") as f:
        saved = json.load(f)
    rows = []
    for p in saved["points"]:
        if "accuracy" not in p:
            raise DiagnosticError(
                f"{args.grid_report} has no per-point accuracy; "
                "the run had no gold labels"
            )
        rows.append((int(p["n"]), int(p["m"]), float(p["entropy"]), float(p["accuracy"])))
    entropies = np.asarray([r[2] for r in rows])
    accs = np.asarray([r[3] for r in rows])
    table = DiagnosticTable(rows=rows, spearman=spearman(entropies, accs))
    Path(args.out).write_text(table.to_csv(), encoding="utf-8")
    print(f"wrote {args.out} ({len(rows)} points, spearman={table.spearman:.4f})")
    return 0


_COMMANDS = {
    "index": _cmd_index,
    "run": _cmd_run,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EngineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
