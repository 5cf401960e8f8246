# -*- coding: utf-8 -*-
"""Experiment manifests and the strategy x seed experiment runner."""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import networks as nets
from .data_io import (
    TEST,
    RankingCorpus,
    SentimentCorpus,
    build_rank_sets,
    build_sentiment_sets,
    hold_out,
    load_ranking_corpus,
    load_sentiment_corpus,
)
from .errors import ConfigError, CwsError, UnsupportedStrategyError
from .evaluation import (
    RankedList,
    accuracy,
    bm25_runs,
    macro_f1,
    mean_average_precision,
    ndcg_at_k,
    paired_t_test,
    predicted_classes,
    rank_queries,
    write_trec_run,
)
from .networks import RANKING, SENTIMENT, TASKS, ModelParameters, NetworkDims
from .node_resources.bm25 import Bm25Params
from .node_resources.feature_tables import load_feature_table, overlay
from .node_resources.sentiment_lexicon import SentimentLexicon, lexicon_annotate, load_lexicon_tsv
from .strategies import STRATEGY_CLASS_MAPPINGS
from .synthetic import SyntheticSpec, gen_synth_ranking, gen_synth_sentiment
from .training import UNSUPPORTED_STRATEGIES, LabeledSets, TrainConfig, canonical_strategy, run_strategy
from .utility_nodes.curve_writer import write_curves_csv
from .utility_nodes.result_scribe import (
    MetricRow,
    SignificanceRow,
    cell_stem,
    mean_by_strategy,
    write_metrics_csv,
    write_significance_csv,
    write_summary_json,
)

logger = logging.getLogger(__name__)

CELL_ERRORS = (CwsError, ValueError, RuntimeError, ArithmeticError, KeyError, OSError)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyEntry:
    """A named strategy cell column; ``train`` overrides apply on top of the manifest's."""

    label: str
    strategy: str
    train: Mapping[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentManifest:
    """
    Declarative experiment description (YAML).

    Example:
        task: sentiment
        synthetic: {noise_rate: 0.3}
        strategies: [WA, WSO, CWS_JT]
        seeds: [0, 1, 2, 3, 4]
        train: {max_weak_batches: 200}
        out_dir: runs/sentiment
    """

    task: str
    strategies: List[StrategyEntry]
    seeds: List[int]
    out_dir: str = "out"
    data: Dict[str, str] = field(default_factory=dict)
    synthetic: Optional[Dict[str, Any]] = None
    train: Dict[str, Any] = field(default_factory=dict)
    network: Dict[str, Any] = field(default_factory=dict)
    evaluation: Dict[str, Any] = field(default_factory=dict)
    baseline: Optional[str] = None
    pretrained_embeddings: Optional[str] = None
    data_seed: int = 0
    shuffle_orientation: bool = True
    test_fraction: float = 0.5
    save_params: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task '{self.task}', expected one of {TASKS}")
        if not self.strategies:
            raise ConfigError("manifest lists no strategy")
        if not self.seeds:
            raise ConfigError("manifest lists no seed")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"strategy labels must be unique, got {labels}")
        for entry in self.strategies:
            if entry.strategy in UNSUPPORTED_STRATEGIES:
                raise UnsupportedStrategyError(f"strategy '{entry.strategy}' is not supported")
            if entry.strategy not in STRATEGY_CLASS_MAPPINGS:
                raise ConfigError(f"unknown strategy '{entry.strategy}'")
        if self.synthetic is None and not self.data:
            raise ConfigError("manifest needs either 'data' paths or a 'synthetic' section")
        if self.baseline is not None and self.baseline not in labels:
            raise ConfigError(f"baseline '{self.baseline}' is not one of the strategies {labels}")
        # fail on bad overrides before any cell runs
        TrainConfig.defaults(self.task, **self.train)
        NetworkDims.defaults(self.task, **self.network)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: str = "") -> "ExperimentManifest":
        if not isinstance(data, Mapping):
            raise ConfigError("manifest must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown manifest keys: {', '.join(unknown)}")
        values = dict(data)
        values["strategies"] = [_strategy_entry(s) for s in values.get("strategies") or []]
        values["seeds"] = [int(s) for s in values.get("seeds") or []]
        values["task"] = str(values.get("task", "")).lower()
        paths = dict(values.get("data") or {})
        for key in ("out_dir", "pretrained_embeddings"):
            if values.get(key):
                values[key] = _resolve(base_dir, values[key])
        values["data"] = {k: _resolve(base_dir, v) for k, v in paths.items()}
        return cls(**values)

    @classmethod
    def load(cls, path: str) -> "ExperimentManifest":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"manifest {path} is not valid YAML: {e}") from e
        return cls.from_mapping(data or {}, os.path.dirname(os.path.abspath(path)))

    @property
    def baseline_label(self) -> str:
        if self.baseline is not None:
            return self.baseline
        fallback = load_feature_table("evaluation", "significance")["baseline"]
        labels = [s.label for s in self.strategies]
        return fallback if fallback in labels else labels[0]

    def train_config(self, entry: StrategyEntry, seed: int) -> TrainConfig:
        overrides = dict(self.train)
        overrides.update(entry.train)
        overrides.update(strategy=entry.strategy, seed=seed)
        return TrainConfig.defaults(self.task, **overrides)


def _strategy_entry(value) -> StrategyEntry:
    if isinstance(value, str):
        name = canonical_strategy(value)
        return StrategyEntry(name, name)
    if isinstance(value, Mapping):
        if "strategy" not in value:
            raise ConfigError(f"strategy entry {dict(value)} has no 'strategy' key")
        name = canonical_strategy(value["strategy"])
        return StrategyEntry(str(value.get("label", name)), name, dict(value.get("train") or {}))
    raise ConfigError(f"bad strategy entry {value!r}")


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) or not base_dir else os.path.join(base_dir, path)


# ---------------------------------------------------------------------------
# Prepared task data
# ---------------------------------------------------------------------------


class TaskData:
    """Training sets plus everything needed to evaluate a model on the test split."""

    task: str = ""
    primary_metric: str = ""
    metric_names: Tuple[str, ...] = ()

    def __init__(self, sets: LabeledSets, vocabulary):
        self.sets = sets
        self.vocabulary = vocabulary

    def idf_index(self):
        return None

    def evaluate(self, params: ModelParameters) -> Tuple[Dict[str, float], Optional[Dict[str, RankedList]]]:
        raise NotImplementedError

    def evaluate_annotator(self) -> Tuple[Dict[str, float], Optional[Dict[str, RankedList]]]:
        raise NotImplementedError

    def checkpoint_metric(self, params: ModelParameters) -> float:
        return self.evaluate(params)[0][self.primary_metric]


class RankingTask(TaskData):
    task = RANKING
    primary_metric = "map"
    metric_names = ("map", "ndcg@20")

    def __init__(self, corpus: RankingCorpus, bm25: Bm25Params, settings: Mapping[str, Any], data_seed: int, shuffle_orientation: bool, test_fraction: float):
        self.corpus = corpus
        self.bm25 = bm25
        self.index = corpus.index()
        self.settings = settings
        self.metric_names = ("map", f"ndcg@{int(settings['ndcg_k'])}")
        labeled = corpus.split_ids("train")
        test_ids = corpus.split_ids(TEST)
        if not test_ids:
            labeled, test_ids = hold_out(labeled, test_fraction, data_seed)
        self.test_ids = [q for q in test_ids if corpus.qrels.relevant(q)]
        if not self.test_ids:
            raise ConfigError("no test query with a relevant judgment")
        sets = build_rank_sets(
            corpus, self.index, bm25, seed=data_seed, shuffle_orientation=shuffle_orientation, labeled_ids=labeled
        )
        super().__init__(sets, corpus.vocabulary)
        self._documents = corpus.encoded_documents()
        self._queries = {q: (corpus.queries[q], corpus.encoded_query(q)) for q in self.test_ids}

    def idf_index(self):
        return self.index

    def _metrics(self, runs: Dict[str, RankedList]) -> Dict[str, float]:
        return {
            "map": mean_average_precision(runs, self.corpus.qrels, int(self.settings["map_cutoff"])),
            self.metric_names[1]: ndcg_at_k(runs, self.corpus.qrels, int(self.settings["ndcg_k"])),
        }

    def evaluate(self, params):
        runs = rank_queries(
            params, self._queries, self._documents, self.index, self.bm25,
            depth=int(self.settings["eval_depth"]), pool_size=int(self.settings["rerank_pool"]),
        )
        return self._metrics(runs), runs

    def evaluate_annotator(self):
        runs = bm25_runs({q: terms for q, (terms, _) in self._queries.items()}, self.index, self.bm25, int(self.settings["eval_depth"]))
        return self._metrics(runs), runs


class SentimentTask(TaskData):
    task = SENTIMENT
    primary_metric = "macro_f1"
    metric_names = ("macro_f1", "accuracy")

    def __init__(self, corpus: SentimentCorpus, lexicon: SentimentLexicon, settings: Mapping[str, Any], data_seed: int, test_fraction: float):
        self.corpus = corpus
        self.lexicon = lexicon
        self.classes = tuple(int(c) for c in settings["f1_classes"])
        test = corpus.test
        if not test:
            kept, test = hold_out(corpus.labeled, test_fraction, data_seed)
            corpus = SentimentCorpus(corpus.unlabeled, kept, [], corpus.vocabulary)
        self.test = [r for r in test if r.tokens]
        if not self.test:
            raise ConfigError("no labeled test sentence")
        super().__init__(build_sentiment_sets(corpus, lexicon), corpus.vocabulary)
        self._instances = [corpus.encode(r) for r in self.test]
        self._gold = np.array([r.label for r in self.test])

    def _metrics(self, predictions) -> Dict[str, float]:
        return {
            "macro_f1": macro_f1(predictions, self._gold, self.classes),
            "accuracy": accuracy(predictions, self._gold),
        }

    def evaluate(self, params):
        return self._metrics(predicted_classes(nets.predict(params, self._instances))), None

    def evaluate_annotator(self):
        weak = np.vstack([lexicon_annotate(self.lexicon, r.tokens) for r in self.test])
        return self._metrics(predicted_classes(weak)), None


def load_corpus(manifest: ExperimentManifest) -> Tuple[Any, Optional[SentimentLexicon]]:
    """The manifest's corpus (loaded or generated) and, for sentiment, its lexicon."""
    if manifest.task == RANKING:
        if manifest.synthetic is not None:
            return gen_synth_ranking(SyntheticSpec.defaults(RANKING, **manifest.synthetic)), None
        _require(manifest.data, ("docs", "queries", "qrels"))
        corpus = load_ranking_corpus(
            manifest.data["docs"], manifest.data["queries"], manifest.data["qrels"], manifest.data.get("query_log")
        )
        return corpus, None
    if manifest.synthetic is not None:
        generated = gen_synth_sentiment(SyntheticSpec.defaults(SENTIMENT, **manifest.synthetic))
        return generated.corpus, generated.lexicon
    _require(manifest.data, ("sentences", "lexicon"))
    return load_sentiment_corpus(manifest.data["sentences"]), load_lexicon_tsv(manifest.data["lexicon"])


def prepare_task(manifest: ExperimentManifest) -> TaskData:
    """Load or generate the corpus named by the manifest and assemble U, V and the test split."""
    settings = overlay(load_feature_table("evaluation", manifest.task), manifest.evaluation, "evaluation")
    corpus, lexicon = load_corpus(manifest)
    if manifest.task == RANKING:
        return RankingTask(corpus, Bm25Params.defaults(), settings, manifest.data_seed, manifest.shuffle_orientation, manifest.test_fraction)
    return SentimentTask(corpus, lexicon, settings, manifest.data_seed, manifest.test_fraction)


def _require(data: Mapping[str, str], keys: Sequence[str]) -> None:
    missing = [k for k in keys if k not in data]
    if missing:
        raise ConfigError(f"manifest data section misses: {', '.join(missing)}")


def init_cell_parameters(manifest: ExperimentManifest, task_data: TaskData, config: TrainConfig) -> ModelParameters:
    dims = NetworkDims.defaults(manifest.task, **manifest.network)
    return nets.init_parameters(
        manifest.task,
        dims,
        config.seed,
        task_data.vocabulary,
        pretrained_embeddings=manifest.pretrained_embeddings,
        idf_index=task_data.idf_index(),
        dropout=config.dropout,
    )


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


@dataclass
class CellOutcome:
    label: str
    seed: int
    metrics: Optional[Dict[str, float]]
    error: Optional[str] = None


@dataclass
class ExperimentResult:
    metric_rows: List[MetricRow]
    significance_rows: List[SignificanceRow]
    cells: List[CellOutcome]

    @property
    def failed(self) -> List[CellOutcome]:
        return [c for c in self.cells if c.metrics is None]


def run_cell(
    manifest: ExperimentManifest, task_data: TaskData, entry: StrategyEntry, seed: int, out_dir: str
) -> Tuple[Dict[str, float], ModelParameters]:
    """Train, evaluate and persist one (strategy, seed) cell."""
    stem = cell_stem(entry.label, seed)
    config = manifest.train_config(entry, seed)
    params = init_cell_parameters(manifest, task_data, config)
    if entry.strategy == "WA":
        metrics, runs = task_data.evaluate_annotator()
        curves = []
    else:
        evaluators = {"test": task_data.checkpoint_metric}
        result = run_strategy(entry.strategy, task_data.sets, config, params, evaluators)
        params = result.params
        curves = result.curves
        metrics, runs = task_data.evaluate(params)
    write_curves_csv(curves, os.path.join(out_dir, "curves", f"{stem}.csv"))
    if runs is not None:
        os.makedirs(os.path.join(out_dir, "runs"), exist_ok=True)
        write_trec_run(runs, os.path.join(out_dir, "runs", f"{stem}.run"), tag=entry.label)
    if manifest.save_params:
        os.makedirs(os.path.join(out_dir, "params"), exist_ok=True)
        params.save(os.path.join(out_dir, "params", f"{stem}.npz"))
    return metrics, params


def significance_rows(
    rows: Sequence[MetricRow], labels: Sequence[str], baseline: str, metric: str, alpha: float
) -> List[SignificanceRow]:
    """Paired t-test of every strategy against the baseline, paired by seed."""
    values: Dict[Tuple[str, int], float] = {
        (r.strategy, r.seed): r.value for r in rows if r.metric == metric and r.value is not None
    }
    compared = [label for label in labels if label != baseline]
    out = []
    for label in compared:
        seeds = sorted(s for (l, s) in values if l == label and (baseline, s) in values)
        if len(seeds) < 2:
            logger.warning("%s vs %s: fewer than two paired seeds, no significance test", label, baseline)
            continue
        pairs = [(values[(label, s)], values[(baseline, s)]) for s in seeds]
        res = paired_t_test(pairs, comparisons=max(1, len(compared)), alpha=alpha)
        out.append(SignificanceRow(label, baseline, res.t, res.p, res.significant))
    return out


def run_experiment(manifest: ExperimentManifest, out_dir: Optional[str] = None) -> ExperimentResult:
    """
    Run every (strategy, seed) cell of a manifest and write the aggregate tables.

    A cell that raises is logged, recorded as failed and skipped; the remaining cells
    still run. Outputs (under ``out_dir``): metrics.csv, significance.csv,
    summary.json, curves/<cell>.csv, runs/<cell>.run (ranking).
    """
    out_dir = out_dir or manifest.out_dir
    os.makedirs(out_dir, exist_ok=True)
    task_data = prepare_task(manifest)
    alpha = float(load_feature_table("evaluation", "significance")["alpha"])

    rows: List[MetricRow] = []
    cells: List[CellOutcome] = []
    for entry in manifest.strategies:
        for seed in manifest.seeds:
            logger.info("cell %s seed %d", entry.label, seed)
            try:
                metrics, _ = run_cell(manifest, task_data, entry, seed, out_dir)
            except CELL_ERRORS as e:
                logger.error("cell %s seed %d failed: %s", entry.label, seed, e)
                cells.append(CellOutcome(entry.label, seed, None, f"{type(e).__name__}: {e}"))
                rows.extend(MetricRow(entry.label, seed, m, None) for m in task_data.metric_names)
                continue
            cells.append(CellOutcome(entry.label, seed, metrics))
            rows.extend(MetricRow(entry.label, seed, m, metrics[m]) for m in task_data.metric_names)

    labels = [s.label for s in manifest.strategies]
    baseline = manifest.baseline_label
    sig = significance_rows(rows, labels, baseline, task_data.primary_metric, alpha)
    write_metrics_csv(rows, os.path.join(out_dir, "metrics.csv"))
    write_significance_csv(sig, os.path.join(out_dir, "significance.csv"))
    write_summary_json(
        {
            "task": manifest.task,
            "baseline": baseline,
            "primary_metric": task_data.primary_metric,
            "means": {m: mean_by_strategy(rows, m) for m in task_data.metric_names},
            "failed_cells": [{"strategy": c.label, "seed": c.seed, "error": c.error} for c in cells if c.metrics is None],
            "set_sizes": {"U": len(task_data.sets.U), "V": len(task_data.sets.V)},
        },
        os.path.join(out_dir, "summary.json"),
    )
    return ExperimentResult(rows, sig, cells)
