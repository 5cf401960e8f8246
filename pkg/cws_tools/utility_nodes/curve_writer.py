# -*- coding: utf-8 -*-
from typing import Iterable, List, Optional
import csv
import os

from ..training import CurveRecord

CURVE_HEADER = ("weak_batch", "split", "loss_t", "loss_c", "loss_wso", "metric_test")


def _fmt(value: Optional[float]) -> str:
    """6-decimal float, empty cell for a missing value"""
    return "" if value is None else f"{float(value):.6f}"


def write_curves_csv(records: Iterable[CurveRecord], path: str) -> None:
    """
    Write learning-curve records, one row per checkpoint per split.

    Args:
        records: CurveRecords in emission order
        path: Output CSV path; parent folders are created
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for r in records:
            writer.writerow([r.weak_batch, r.split, _fmt(r.loss_t), _fmt(r.loss_c), _fmt(r.loss_wso), _fmt(r.metric_test)])


def read_curves_csv(path: str) -> List[CurveRecord]:
    def _num(cell: str) -> Optional[float]:
        return float(cell) if cell != "" else None

    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    return [
        CurveRecord(
            weak_batch=int(row["weak_batch"]),
            split=row["split"],
            loss_t=_num(row["loss_t"]),
            loss_c=_num(row["loss_c"]),
            loss_wso=_num(row["loss_wso"]),
            metric_test=_num(row["metric_test"]),
        )
        for row in rows
    ]


def first_crossing(records: Iterable[CurveRecord], threshold: float, split: str = "test") -> Optional[int]:
    """Weak-batch index of the first checkpoint whose metric exceeds ``threshold``."""
    for r in records:
        if r.split == split and r.metric_test is not None and r.metric_test > threshold:
            return r.weak_batch
    return None
