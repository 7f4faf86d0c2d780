"""Error-type classification, inter-annotator agreement, distance statistics."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .core import (
    AnnotatedPassage,
    ContextSet,
    ContextType,
    gold_contexts,
    normalize,
    sentence_index,
)
from .scoring import PredictionRecord, index_predictions


class ErrorCategory(Enum):
    """Machine-decidable prediction error taxonomy.

    Overlap and Disjoint jointly cover the judgment-dependent region that a
    human would split into mistaken-but-related and correct-but-rephrased.
    """

    EXACT_AFTER_NORM = "exact_after_norm"
    SPURIOUS = "spurious"
    MISSING = "missing"
    PARTIAL = "partial"
    OVER = "over"
    OVERLAP = "overlap"
    DISJOINT = "disjoint"


ERROR_CATEGORIES = tuple(c for c in ErrorCategory if c is not ErrorCategory.EXACT_AFTER_NORM)


def classify_error(gold: ContextSet, pred: ContextSet, ctype: ContextType) -> ErrorCategory:
    """Deterministic precedence over the normalized joined strings.

    Joining uses single spaces in passage order on the gold side and decode
    order on the predicted side, so multi-span sets classify deterministically.
    """
    g_items = [x for x in (normalize(s) for s in gold.of_type(ctype)) if x]
    p_items = [x for x in (normalize(s) for s in pred.of_type(ctype)) if x]
    if not g_items and not p_items:
        return ErrorCategory.EXACT_AFTER_NORM
    if not g_items:
        return ErrorCategory.SPURIOUS
    if not p_items:
        return ErrorCategory.MISSING
    g_star = " ".join(g_items)
    p_star = " ".join(p_items)
    if g_star == p_star:
        return ErrorCategory.EXACT_AFTER_NORM
    if p_star in g_star:
        return ErrorCategory.PARTIAL
    if g_star in p_star:
        return ErrorCategory.OVER
    overlap = Counter(g_star.split()) & Counter(p_star.split())
    if sum(overlap.values()) > 0:
        return ErrorCategory.OVERLAP
    return ErrorCategory.DISJOINT


@dataclass(frozen=True)
class ErrorReport:
    """Error counts per (category, type); exact matches reported separately."""

    errors: dict[tuple[ErrorCategory, ContextType], int]
    exact: dict[ContextType, int]
    diagnostics: tuple[str, ...] = ()


def error_report(
    gold: Sequence[AnnotatedPassage], preds: Sequence[PredictionRecord]
) -> ErrorReport:
    """Classify every (event, type) pair where gold or prediction is non-empty."""
    indexed = index_predictions(preds)
    errors = {(cat, t): 0 for cat in ERROR_CATEGORIES for t in ContextType}
    exact = {t: 0 for t in ContextType}
    diagnostics = []
    for passage in gold:
        for event in passage.events:
            key = (passage.passage_id, event.id)
            record = indexed.get(key)
            if record is None:
                diagnostics.append(f"no prediction for event {key}, treated as empty")
                predicted = ContextSet()
            else:
                predicted = record.predicted
            gold_ctx = gold_contexts(passage, event.id)
            for ctype in ContextType:
                if not gold_ctx.of_type(ctype) and not predicted.of_type(ctype):
                    continue
                category = classify_error(gold_ctx, predicted, ctype)
                if category is ErrorCategory.EXACT_AFTER_NORM:
                    exact[ctype] += 1
                else:
                    errors[(category, ctype)] += 1
    return ErrorReport(errors=errors, exact=exact, diagnostics=tuple(diagnostics))


def error_report_to_dict(report: ErrorReport) -> dict:
    by_category = {
        cat.value: {t.value: report.errors[(cat, t)] for t in ContextType}
        for cat in ERROR_CATEGORIES
    }
    totals = {
        t.value: sum(report.errors[(cat, t)] for cat in ERROR_CATEGORIES)
        for t in ContextType
    }
    return {
        "errors": by_category,
        "total": totals,
        "exact_after_norm": {t.value: report.exact[t] for t in ContextType},
    }


def format_error_table(report: ErrorReport) -> str:
    lines = [
        f"{'Error Type':<12}{'Location':>10}{'Temporal':>10}",
        "-" * 32,
    ]
    for cat in ERROR_CATEGORIES:
        lines.append(
            f"{cat.value:<12}"
            f"{report.errors[(cat, ContextType.LOCATION)]:>10}"
            f"{report.errors[(cat, ContextType.TEMPORAL)]:>10}"
        )
    lines.append("-" * 32)
    loc_total = sum(report.errors[(cat, ContextType.LOCATION)] for cat in ERROR_CATEGORIES)
    tmp_total = sum(report.errors[(cat, ContextType.TEMPORAL)] for cat in ERROR_CATEGORIES)
    lines.append(f"{'total':<12}{loc_total:>10}{tmp_total:>10}")
    lines.append(
        f"{'exact':<12}"
        f"{report.exact[ContextType.LOCATION]:>10}"
        f"{report.exact[ContextType.TEMPORAL]:>10}"
    )
    return "\n".join(lines)


@dataclass(frozen=True)
class AgreementItem:
    """One doubly-annotated item with each rater's category label."""

    item_id: str
    rater_a: str
    rater_b: str


def cohens_kappa(items: Sequence[AgreementItem]) -> float:
    """Chance-corrected agreement: (p_o - p_e) / (1 - p_e).

    Chance agreement p_e comes from the per-rater marginal category
    frequencies; perfect agreement with degenerate marginals returns 1.
    """
    if not items:
        raise ValueError("no agreement items")
    n = len(items)
    observed = sum(1 for item in items if item.rater_a == item.rater_b) / n
    a_counts = Counter(item.rater_a for item in items)
    b_counts = Counter(item.rater_b for item in items)
    expected = sum(
        (a_counts[c] / n) * (b_counts[c] / n) for c in set(a_counts) | set(b_counts)
    )
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def agreement_summary(items: Sequence[AgreementItem]) -> dict:
    n = len(items)
    observed = sum(1 for item in items if item.rater_a == item.rater_b) / n
    a_counts = Counter(item.rater_a for item in items)
    b_counts = Counter(item.rater_b for item in items)
    expected = sum(
        (a_counts[c] / n) * (b_counts[c] / n) for c in set(a_counts) | set(b_counts)
    )
    return {
        "kappa": cohens_kappa(items),
        "items": n,
        "observed_agreement": observed,
        "chance_agreement": expected,
    }


def read_agreement_items(path: str | Path) -> list[AgreementItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                items.append(AgreementItem(str(d["item_id"]), str(d["rater_a"]), str(d["rater_b"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad agreement item: {exc}") from exc
    return items


@dataclass(frozen=True)
class DistanceHistogram:
    """Sentence distances between events and their related mentions."""

    inter: dict[int, int]  # distance >= 1
    intra: int  # distance == 0
    skipped: int  # relations lacking offsets


def distance_histogram(passages: Sequence[AnnotatedPassage]) -> DistanceHistogram:
    """Histogram of |sentence(event) - sentence(mention)| over all relations."""
    inter: dict[int, int] = {}
    intra = 0
    skipped = 0
    for p in passages:
        events = p.events_by_id()
        mentions = p.mentions_by_id()
        for r in p.relations:
            e_span = events[r.event_id].span
            m_span = mentions[r.mention_id].span
            if not (e_span.has_offsets and m_span.has_offsets):
                skipped += 1
                continue
            distance = abs(
                sentence_index(p.text, e_span.char_start)  # type: ignore[arg-type]
                - sentence_index(p.text, m_span.char_start)  # type: ignore[arg-type]
            )
            if distance == 0:
                intra += 1
            else:
                inter[distance] = inter.get(distance, 0) + 1
    return DistanceHistogram(inter=dict(sorted(inter.items())), intra=intra, skipped=skipped)


def distance_histogram_to_dict(histogram: DistanceHistogram) -> dict:
    total = histogram.intra + sum(histogram.inter.values())
    return {
        "inter": {str(k): v for k, v in histogram.inter.items()},
        "intra": histogram.intra,
        "skipped": histogram.skipped,
        "intersentential_fraction": (
            sum(histogram.inter.values()) / total if total else 0.0
        ),
    }


def write_distance_csv(path: str | Path, histogram: DistanceHistogram) -> None:
    """Plot-data CSV of the inter-sentential histogram: distance, count."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["distance", "count"])
        for distance, count in sorted(histogram.inter.items()):
            writer.writerow([distance, count])
