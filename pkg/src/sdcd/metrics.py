"""Structure-recovery metrics between predicted and true directed graphs."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .graphs import DiGraph, Pdag, cpdag

__all__ = [
    "MetricReport",
    "evaluate",
    "precision_recall_f1",
    "shd",
    "shd_cpdag",
]


def _check_same_d(pred: DiGraph, truth: DiGraph) -> None:
    if pred.d != truth.d:
        raise ValueError(f"node-count mismatch: {pred.d} vs {truth.d}")


def _pair_marks(g: DiGraph) -> dict:
    """Map each unordered pair to its set of directions present in g."""
    marks = {}
    for i, j in g.edges:
        marks.setdefault(frozenset((i, j)), set()).add((i, j))
    return marks


def shd(pred: DiGraph, truth: DiGraph) -> int:
    """Structural Hamming distance; a reversal counts as one operation."""
    _check_same_d(pred, truth)
    a, b = _pair_marks(pred), _pair_marks(truth)
    dist = 0
    for pair in a.keys() | b.keys():
        ma, mb = a.get(pair), b.get(pair)
        if ma is None or mb is None:
            dist += 1  # addition or deletion
        elif ma != mb:
            dist += 1  # reversal / orientation mismatch
    return dist


def precision_recall_f1(pred: DiGraph, truth: DiGraph) -> tuple:
    """Directed-edge precision, recall, and F1.

    Empty prediction scores precision 0 against a nonempty truth (and 1
    when the truth is also empty), so the trivial empty graph gets F1 0.
    """
    _check_same_d(pred, truth)
    hits = len(pred.edges & truth.edges)
    if pred.edges:
        precision = hits / len(pred.edges)
    else:
        precision = 1.0 if not truth.edges else 0.0
    recall = hits / len(truth.edges) if truth.edges else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _pdag_marks(p: Pdag) -> dict:
    marks = {}
    for i, j in p.directed:
        marks[frozenset((i, j))] = ("->", (i, j))
    for pair in p.undirected:
        marks[pair] = ("-", None)
    return marks


def shd_cpdag(pred: DiGraph, truth: DiGraph) -> int:
    """SHD between the CPDAGs of two DAGs; zero within an equivalence class."""
    _check_same_d(pred, truth)
    a, b = _pdag_marks(cpdag(pred)), _pdag_marks(cpdag(truth))
    dist = 0
    for pair in a.keys() | b.keys():
        ma, mb = a.get(pair), b.get(pair)
        if ma is None or mb is None or ma != mb:
            dist += 1
    return dist


@dataclass
class MetricReport:
    shd: int
    shd_cpdag: int
    precision: float
    recall: float
    f1: float
    n_pred_edges: int
    n_true_edges: int

    CSV_HEADER = "shd,shd_cpdag,precision,recall,f1,n_pred_edges,n_true_edges"

    def to_csv_row(self) -> str:
        return (
            f"{self.shd},{self.shd_cpdag},{format(self.precision, '.17g')},"
            f"{format(self.recall, '.17g')},{format(self.f1, '.17g')},"
            f"{self.n_pred_edges},{self.n_true_edges}"
        )

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def evaluate(pred: DiGraph, truth: DiGraph) -> MetricReport:
    """Compute the full metric report for a predicted/true graph pair."""
    precision, recall, f1 = precision_recall_f1(pred, truth)
    return MetricReport(
        shd=shd(pred, truth),
        shd_cpdag=shd_cpdag(pred, truth),
        precision=precision,
        recall=recall,
        f1=f1,
        n_pred_edges=pred.n_edges,
        n_true_edges=truth.n_edges,
    )
