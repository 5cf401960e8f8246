# -*- coding: utf-8 -*-
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence
import csv
import json
import os

METRICS_HEADER = ("strategy", "seed", "metric", "value")
SIGNIFICANCE_HEADER = ("strategy", "baseline", "t", "p", "bonferroni_significant")
FAILED = "failed"


@dataclass(frozen=True)
class MetricRow:
    strategy: str
    seed: int
    metric: str
    # None marks a failed cell
    value: Optional[float]


@dataclass(frozen=True)
class SignificanceRow:
    strategy: str
    baseline: str
    t: float
    p: float
    significant: bool


def _sanitize_filename(s: str) -> str:
    invalid = '<>:"/\\|?* '
    trans = str.maketrans({c: '_' for c in invalid})
    s2 = (s or "").translate(trans)
    s2 = s2.strip('._')
    return s2 or "cell"


def cell_stem(strategy: str, seed: int) -> str:
    """File stem shared by every output of one (strategy, seed) cell"""
    return f"{_sanitize_filename(strategy)}_seed{int(seed)}"


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return FAILED
    if value != value or value in (float("inf"), float("-inf")):
        return repr(float(value))
    return f"{float(value):.6f}"


def write_metrics_csv(rows: Iterable[MetricRow], path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow([r.strategy, r.seed, r.metric, _fmt(r.value)])


def read_metrics_csv(path: str) -> List[MetricRow]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    return [
        MetricRow(r["strategy"], int(r["seed"]), r["metric"], None if r["value"] == FAILED else float(r["value"]))
        for r in rows
    ]


def write_significance_csv(rows: Iterable[SignificanceRow], path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SIGNIFICANCE_HEADER)
        for r in rows:
            writer.writerow([r.strategy, r.baseline, _fmt(r.t), _fmt(r.p), str(bool(r.significant)).lower()])


def write_summary_json(summary: Dict, path: str) -> None:
    """Human-readable summary next to the tables (means per strategy, failures, settings)"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, ensure_ascii=False, sort_keys=True)
        f.write("\n")


def mean_by_strategy(rows: Sequence[MetricRow], metric: str) -> Dict[str, float]:
    """Mean metric per strategy over successful cells, in first-seen strategy order"""
    sums: Dict[str, List[float]] = {}
    for r in rows:
        if r.metric == metric and r.value is not None:
            sums.setdefault(r.strategy, []).append(r.value)
    return {k: sum(v) / len(v) for k, v in sums.items()}
