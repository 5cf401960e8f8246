# -*- coding: utf-8 -*-
"""Command-line entry point: ``cws-tools <subcommand> [flags]``.

Subcommands:
    annotate    emit weak labels for the manifest's unlabeled data
    train       train one (strategy, seed) cell and save its parameters
    eval        evaluate saved parameters on the manifest's test split
    experiment  run every (strategy, seed) cell of a manifest
    gradcheck   finite-difference check of every layer and both networks
    synth       write a synthetic corpus (and lexicon) to files

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 verification failure.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .data_io import UNLABELED, harvest_weak_pairs, write_ranking_corpus, write_sentiment_corpus
from .errors import ConfigError, CorpusParseError, CwsError, UnsupportedStrategyError, ValidationError
from .experiment import (
    ExperimentManifest,
    StrategyEntry,
    load_corpus,
    prepare_task,
    run_cell,
    run_experiment,
)
from .gradcheck import DRAWS, run_gradcheck
from .networks import RANKING, TASKS, ModelParameters
from .node_resources.bm25 import Bm25Params
from .node_resources.feature_tables import load_feature_table
from .node_resources.sentiment_lexicon import lexicon_annotate, write_lexicon_tsv
from .synthetic import SyntheticSpec, bm25_pair_accuracy, gen_synth_ranking, gen_synth_sentiment, lexicon_accuracy
from .training import canonical_strategy
from .utility_nodes.result_scribe import MetricRow, write_metrics_csv, write_summary_json

logger = logging.getLogger("cws_tools")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

LOG_FORMAT = "[%(name)s] %(message)s"


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("cws_tools")
    for old in list(root.handlers):
        root.removeHandler(old)
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False


def _manifest_from_args(args: argparse.Namespace) -> ExperimentManifest:
    """Load the manifest and apply the command-line overrides."""
    if not args.manifest:
        raise ConfigError(f"'{args.command}' needs --manifest")
    manifest = ExperimentManifest.load(args.manifest)
    changes = {}
    if getattr(args, "task", None) and args.task != manifest.task:
        raise ConfigError(f"--task {args.task} disagrees with the manifest task '{manifest.task}'")
    if getattr(args, "seed", None) is not None:
        changes["seeds"] = [args.seed]
    if getattr(args, "strategy", None):
        by_label = {e.label: e for e in manifest.strategies}
        # manifest labels win over strategy names
        wanted = [
            s.strip() if s.strip() in by_label else canonical_strategy(s) for s in args.strategy.split(",") if s.strip()
        ]
        changes["strategies"] = [by_label.get(name, StrategyEntry(name, name)) for name in wanted]
        if manifest.baseline is not None and manifest.baseline not in wanted:
            changes["baseline"] = None
    train = dict(manifest.train)
    if getattr(args, "max_weak_batches", None) is not None:
        train["max_weak_batches"] = args.max_weak_batches
    if getattr(args, "checkpoint_every", None) is not None:
        train["checkpoint_every"] = args.checkpoint_every
    if train != manifest.train:
        changes["train"] = train
    if getattr(args, "out_dir", None):
        changes["out_dir"] = args.out_dir
    return dataclasses.replace(manifest, **changes) if changes else manifest


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_annotate(args: argparse.Namespace) -> int:
    manifest = _manifest_from_args(args)
    corpus, lexicon = load_corpus(manifest)
    os.makedirs(manifest.out_dir, exist_ok=True)
    if manifest.task == RANKING:
        bm25 = Bm25Params.defaults()
        depth = int(load_feature_table("bm25")["harvest_depth"])
        records = harvest_weak_pairs(corpus, corpus.index(), bm25, corpus.split_ids(UNLABELED), depth)
        path = os.path.join(manifest.out_dir, "weak_labels.tsv")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("qid\tdoc_pos\tdoc_neg\tweak_label\n")
            for r in records:
                f.write(f"{r.query_id}\t{r.doc_first}\t{r.doc_second}\t{r.weak_label:.6f}\n")
        count = len(records)
    else:
        path = os.path.join(manifest.out_dir, "weak_labels.jsonl")
        count = 0
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for record in corpus.unlabeled:
                if not record.tokens:
                    continue
                weak = lexicon_annotate(lexicon, record.tokens)
                f.write(json.dumps({"id": record.record_id, "weak": [round(float(x), 6) for x in weak]}) + "\n")
                count += 1
    logger.info("wrote %d weak labels to %s", count, path)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    manifest = _manifest_from_args(args)
    if len(manifest.strategies) != 1 or len(manifest.seeds) != 1:
        raise ConfigError("train runs exactly one cell: pick it with --strategy and --seed")
    manifest = dataclasses.replace(manifest, save_params=True)
    entry, seed = manifest.strategies[0], manifest.seeds[0]
    task_data = prepare_task(manifest)
    metrics, _ = run_cell(manifest, task_data, entry, seed, manifest.out_dir)
    rows = [MetricRow(entry.label, seed, name, metrics[name]) for name in task_data.metric_names]
    write_metrics_csv(rows, os.path.join(manifest.out_dir, "metrics.csv"))
    for row in rows:
        logger.info("%s seed %d %s = %.4f", row.strategy, row.seed, row.metric, row.value)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if not args.params:
        raise ConfigError("eval needs --params")
    manifest = _manifest_from_args(args)
    params = ModelParameters.load(args.params)
    if params.task != manifest.task:
        raise ConfigError(f"parameters are for task '{params.task}', manifest task is '{manifest.task}'")
    task_data = prepare_task(manifest)
    metrics, _ = task_data.evaluate(params)
    label = os.path.splitext(os.path.basename(args.params))[0]
    seed = args.seed if args.seed is not None else 0
    rows = [MetricRow(label, seed, name, metrics[name]) for name in task_data.metric_names]
    write_metrics_csv(rows, os.path.join(manifest.out_dir, "eval_metrics.csv"))
    for row in rows:
        logger.info("%s %s = %.4f", label, row.metric, row.value)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    manifest = _manifest_from_args(args)
    result = run_experiment(manifest)
    if result.failed:
        logger.warning("%d of %d cells failed", len(result.failed), len(result.cells))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    report = run_gradcheck(inject_fault=args.inject_fault, seed=seed, draws=args.draws)
    for line in report.lines():
        logger.info("%s", line)
    if not report.passed:
        logger.error("gradient check failed: %s", ", ".join(f"{c}:{p}" for c, p in report.failures))
        return EXIT_VERIFY
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    overrides = {}
    task = args.task
    out_dir = args.out_dir or "synth"
    if args.manifest:
        manifest = ExperimentManifest.load(args.manifest)
        task = task or manifest.task
        overrides = dict(manifest.synthetic or {})
        out_dir = args.out_dir or manifest.out_dir
    if task not in TASKS:
        raise ConfigError(f"synth needs --task, one of {TASKS}")
    if args.seed is not None:
        overrides["seed"] = args.seed
    spec = SyntheticSpec.defaults(task, **overrides)
    summary = {"task": task, "spec": dataclasses.asdict(spec)}
    if task == RANKING:
        corpus = gen_synth_ranking(spec)
        paths = write_ranking_corpus(corpus, out_dir)
        summary["files"] = sorted(os.path.basename(p) for p in paths.values())
        summary["bm25_pair_accuracy"] = bm25_pair_accuracy(corpus, corpus.index(), Bm25Params.defaults())
        summary["queries"] = {split: len(corpus.split_ids(split)) for split in ("unlabeled", "train", "test")}
    else:
        generated = gen_synth_sentiment(spec)
        write_sentiment_corpus(generated.corpus, os.path.join(out_dir, "sentences.jsonl"))
        write_lexicon_tsv(generated.lexicon, os.path.join(out_dir, "lexicon.tsv"))
        summary["files"] = ["lexicon.tsv", "sentences.jsonl"]
        labeled = generated.corpus.labeled + generated.corpus.test
        summary["lexicon_accuracy"] = lexicon_accuracy(labeled, generated.lexicon, generated.true_labels)
        summary["sentences"] = {
            "unlabeled": len(generated.corpus.unlabeled),
            "train": len(generated.corpus.labeled),
            "test": len(generated.corpus.test),
        }
    write_summary_json(summary, os.path.join(out_dir, "synth_summary.json"))
    logger.info("synthetic %s corpus written to %s", task, out_dir)
    return EXIT_OK


COMMANDS = {
    "annotate": cmd_annotate,
    "train": cmd_train,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "gradcheck": cmd_gradcheck,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cws-tools", description="Controlled weak supervision toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="experiment manifest (YAML)")
    common.add_argument("--seed", type=int, help="run this seed only")
    common.add_argument("--out-dir", dest="out_dir", help="output directory")
    common.add_argument("--task", choices=TASKS)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--strategy", help="strategy name, or comma-separated names")
    training.add_argument("--max-weak-batches", dest="max_weak_batches", type=int)
    training.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)

    sub.add_parser("annotate", parents=[common], help="emit weak labels")
    sub.add_parser("train", parents=[common, training], help="train one cell")
    p_eval = sub.add_parser("eval", parents=[common], help="evaluate saved parameters")
    p_eval.add_argument("--params", help="parameter file written by train (.npz)")
    sub.add_parser("experiment", parents=[common, training], help="run a manifest")
    p_grad = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p_grad.add_argument("--inject-fault", dest="inject_fault", action="store_true", help="double one gradient")
    p_grad.add_argument("--draws", type=int, default=DRAWS, help=f"random parameter draws per check (default {DRAWS})")
    sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    _configure_logging(args.verbose, args.quiet)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UnsupportedStrategyError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except (CorpusParseError, ValidationError, OSError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    except CwsError as e:
        logger.error("%s", e)
        return EXIT_DATA
