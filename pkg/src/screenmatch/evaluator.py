"""Scoring of predicted correspondences against partially labeled ground
truth: IoU alignment, P/R/F1, per-category aggregation, easy-pair filter."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import MalformedDocument
from .geometry import iou
from .kernels import lap_min_cost
from .screen import CorrespondenceMapping, Screen, load_screen


@dataclass(frozen=True)
class EvalRecord:
    pair_id: str
    relation: str  # intra_class | same_screen
    screen_category: Optional[str]
    gt_pairs: tuple          # ((source_id, target_id), ...)
    labeled_source: frozenset
    labeled_target: frozenset

    def __post_init__(self):
        if self.relation not in ("intra_class", "same_screen"):
            raise MalformedDocument(f"unknown relation {self.relation!r}")


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    undefined_precision: bool = False


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def align_to_ground_truth(pred: list, gt: list) -> dict:
    """Greedy descending-IoU matching of predicted elements to ground-truth
    elements; pairs under IoU 0.5 stay unmatched, each side used once."""
    candidates = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            v = iou(p.bounds, g.bounds)
            if v >= 0.5:
                candidates.append((-v, i, j))
    candidates.sort()
    used_pred: set = set()
    used_gt: set = set()
    mapping: dict = {}
    for _, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        mapping[pred[i].element_id] = gt[j].element_id
    return mapping


def score(predicted: CorrespondenceMapping, record: EvalRecord) -> ScoreReport:
    """P/R/F1 under partial labeling: a predicted pair is a false positive
    only when both endpoints are labeled yet the pair is absent from the
    ground truth; pairs touching unlabeled elements are ignored."""
    gt = set(record.gt_pairs)
    predicted_pairs = {(p.source_id, p.target_id) for p in predicted.pairs}
    tp = len(predicted_pairs & gt)
    fp = sum(1 for a, b in predicted_pairs - gt
             if a in record.labeled_source and b in record.labeled_target)
    fn = len(gt - predicted_pairs)
    undefined = (tp + fp) == 0
    precision = 0.0 if undefined else tp / (tp + fp)
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    return ScoreReport(precision=precision, recall=recall,
                       f1=f1_score(precision, recall),
                       tp=tp, fp=fp, fn=fn, undefined_precision=undefined)


@dataclass(frozen=True)
class CategoryRow:
    category: str
    relation: str
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    n_pairs: int


def _micro(tp: int, fp: int, fn: int) -> tuple:
    p = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    r = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    return p, r, f1_score(p, r)


def category_report(results: list) -> list:
    """Micro-averaged rows per (screen category, relation) from (record,
    report) pairs, followed by one overall row."""
    groups: dict = {}
    for record, report in results:
        key = (record.screen_category or "uncategorized", record.relation)
        groups.setdefault(key, []).append(report)
    rows = []
    for (cat, rel) in sorted(groups):
        reports = groups[(cat, rel)]
        tp = sum(r.tp for r in reports)
        fp = sum(r.fp for r in reports)
        fn = sum(r.fn for r in reports)
        p, r, f1 = _micro(tp, fp, fn)
        rows.append(CategoryRow(cat, rel, p, r, f1, tp, fp, fn, len(reports)))
    tp = sum(r.tp for _, r in results)
    fp = sum(r.fp for _, r in results)
    fn = sum(r.fn for _, r in results)
    p, r, f1 = _micro(tp, fp, fn)
    rows.append(CategoryRow("overall", "all", p, r, f1, tp, fp, fn, len(results)))
    return rows


def is_easy_pair(a: Screen, b: Screen) -> bool:
    """True iff the pair is solvable from bounding boxes alone: equal element
    counts and a perfect one-to-one matching with IoU >= 0.9 throughout."""
    if len(a.elements) != len(b.elements):
        return False
    n = len(a.elements)
    cost = np.ones((n, n))
    for i, ea in enumerate(a.elements):
        for j, eb in enumerate(b.elements):
            if iou(ea.bounds, eb.bounds) >= 0.9:
                cost[i, j] = 0.0
    assignment = lap_min_cost(cost)
    total = sum(cost[i, int(assignment[i])] for i in range(n))
    return total == 0.0


# -- dataset loading -----------------------------------------------------

@dataclass(frozen=True)
class DatasetPair:
    record: EvalRecord
    screen_a: Screen
    screen_b: Screen


def load_dataset(root) -> list:
    """Read screens/*.json and pairs/*.json into DatasetPair rows, sorted by
    pair id."""
    root = Path(root)
    if not (root / "pairs").is_dir():
        raise MalformedDocument(f"{root} has no pairs/ directory")
    screens: dict = {}
    for path in sorted((root / "screens").glob("*.json")):
        s = load_screen(path)
        screens[s.screen_id] = s
    pairs = []
    for path in sorted((root / "pairs").glob("*.json")):
        with open(path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}: {exc}") from exc
        for key in ("screen_a", "screen_b", "gt_pairs", "relation"):
            if key not in doc:
                raise MalformedDocument(f"{path}: missing {key!r}")
        for sid in (doc["screen_a"], doc["screen_b"]):
            if sid not in screens:
                raise MalformedDocument(f"{path}: unknown screen {sid!r}")
        a, b = screens[doc["screen_a"]], screens[doc["screen_b"]]
        gt = tuple((str(x), str(y)) for x, y in doc["gt_pairs"])
        for sa, sb in gt:
            if sa not in a.element_ids() or sb not in b.element_ids():
                raise MalformedDocument(
                    f"{path}: ground-truth pair ({sa!r}, {sb!r}) references "
                    f"missing elements")
        labeled_a = frozenset(doc.get("labeled_a", [x for x, _ in gt]))
        labeled_b = frozenset(doc.get("labeled_b", [y for _, y in gt]))
        record = EvalRecord(pair_id=path.stem, relation=doc["relation"],
                            screen_category=a.screen_category, gt_pairs=gt,
                            labeled_source=labeled_a, labeled_target=labeled_b)
        pairs.append(DatasetPair(record=record, screen_a=a, screen_b=b))
    return pairs


def evaluate_dataset(pairs: list, correspond_fn: Callable,
                     skip_easy: bool = False) -> list:
    """Run a correspondence function over dataset pairs; returns (record,
    report) tuples. `skip_easy` drops same-screen pairs solvable from boxes
    alone."""
    results = []
    for dp in pairs:
        if skip_easy and dp.record.relation == "same_screen" \
                and is_easy_pair(dp.screen_a, dp.screen_b):
            continue
        mapping = correspond_fn(dp.screen_a, dp.screen_b)
        results.append((dp.record, score(mapping, dp.record)))
    return results


def write_report_csv(rows: list, path) -> None:
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["category", "relation", "P", "R", "F1", "TP", "FP", "FN",
                    "n_pairs"])
        for row in rows:
            w.writerow([row.category, row.relation, f"{row.precision:.4f}",
                        f"{row.recall:.4f}", f"{row.f1:.4f}", row.tp, row.fp,
                        row.fn, row.n_pairs])
