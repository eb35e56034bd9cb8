"""Span-level precision / recall / F1 with exact or overlap matching."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

from .taxonomy import ALL_TAG_TYPES, DEFAULT_GROUPS, TagType, group_of
from .tagger import SpanTag


def percent(value: Fraction | float | None) -> float | None:
    """Fraction -> percentage rounded half-up to two decimals."""
    if value is None:
        return None
    if not isinstance(value, Fraction):
        value = Fraction(repr(value))
    hundredths = value * 10000
    # half-up on an exact rational
    rounded = (hundredths.numerator * 2 + hundredths.denominator) // (2 * hundredths.denominator)
    return float(Decimal(rounded) / 100)


@dataclass(frozen=True)
class EvalReport:
    ttype: TagType
    tp: int
    fp: int
    fn: int
    dataset_length: int = 0

    @property
    def precision(self) -> Fraction | None:
        denom = self.tp + self.fp
        return Fraction(self.tp, denom) if denom else None

    @property
    def recall(self) -> Fraction | None:
        denom = self.tp + self.fn
        return Fraction(self.tp, denom) if denom else None

    @property
    def f1(self) -> Fraction:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return Fraction(0)
        return 2 * p * r / (p + r)

    @property
    def model(self) -> str:
        return group_of(self.ttype, DEFAULT_GROUPS).group_id

    def to_dict(self) -> dict:
        return {
            "ttype": self.ttype.value,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "dataset_length": self.dataset_length,
            "precision": percent(self.precision),
            "recall": percent(self.recall),
            "f1": percent(self.f1),
            "precision_defined": self.precision is not None,
            "recall_defined": self.recall is not None,
            "model": self.model,
        }


def _overlaps(a: SpanTag, b: SpanTag) -> bool:
    return a.start < b.end and b.start < a.end


def _match_count(gold: list[SpanTag], pred: list[SpanTag]) -> int:
    """Maximum one-to-one overlap matching between same-paragraph spans.

    Predictions are visited in text order and try gold spans in text order,
    so the first pass is the plain greedy assignment; augmenting paths only
    kick in where greedy would strand a span. The size of a maximum
    matching does not depend on which side is called gold.
    """
    gold = sorted(gold, key=lambda s: (s.start, s.end))
    pred = sorted(pred, key=lambda s: (s.start, s.end))
    adj = [[gi for gi, g in enumerate(gold) if _overlaps(p, g)] for p in pred]
    owner: dict[int, int] = {}

    def augment(pi: int, seen: set[int]) -> bool:
        for gi in adj[pi]:
            if gi in seen:
                continue
            seen.add(gi)
            if gi not in owner or augment(owner[gi], seen):
                owner[gi] = pi
                return True
        return False

    return sum(1 for pi in range(len(pred)) if augment(pi, set()))


def evaluate_spans(
    gold: Sequence[SpanTag], predicted: Sequence[SpanTag], mode: str = "overlap"
) -> dict[TagType, EvalReport]:
    """Per-concept counts and scores for ``predicted`` against ``gold``.

    Only concepts present in either list get a report.
    """
    if mode not in ("exact", "overlap"):
        raise ValueError(f"mode must be 'exact' or 'overlap', not {mode!r}")
    by_type_gold: dict[TagType, list[SpanTag]] = defaultdict(list)
    by_type_pred: dict[TagType, list[SpanTag]] = defaultdict(list)
    for s in gold:
        by_type_gold[s.ttype].append(s)
    for s in predicted:
        by_type_pred[s.ttype].append(s)

    group_paras: dict[str, set[str]] = defaultdict(set)
    for s in list(gold) + list(predicted):
        group_paras[group_of(s.ttype).group_id].add(s.para_id)

    reports = {}
    for ttype in ALL_TAG_TYPES:
        g, p = by_type_gold.get(ttype, []), by_type_pred.get(ttype, [])
        if not g and not p:
            continue
        if mode == "exact":
            remaining: dict[tuple, int] = defaultdict(int)
            for s in g:
                remaining[s.key()] += 1
            tp = 0
            for s in p:
                if remaining[s.key()] > 0:
                    remaining[s.key()] -= 1
                    tp += 1
        else:
            gp: dict[str, list[SpanTag]] = defaultdict(list)
            pp: dict[str, list[SpanTag]] = defaultdict(list)
            for s in g:
                gp[s.para_id].append(s)
            for s in p:
                pp[s.para_id].append(s)
            tp = sum(_match_count(gp[pid], pp[pid]) for pid in sorted(set(gp) & set(pp)))
        reports[ttype] = EvalReport(
            ttype, tp, len(p) - tp, len(g) - tp, len(group_paras[group_of(ttype).group_id])
        )
    return reports


_COLUMNS = ("Tag", "Dataset length", "Precision", "Recall", "F1", "Model")


def _fmt(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.2f}"


def format_table(reports: Iterable[EvalReport]) -> str:
    """Aligned plain-text table in the layout Tag / length / P / R / F1 / Model."""
    rows = [_COLUMNS] + [
        (
            r.ttype.value,
            str(r.dataset_length),
            _fmt(percent(r.precision)),
            _fmt(percent(r.recall)),
            _fmt(percent(r.f1)),
            r.model,
        )
        for r in reports
    ]
    widths = [max(len(row[c]) for row in rows) for c in range(len(_COLUMNS))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows
    )


def reports_to_json(reports: Iterable[EvalReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)
