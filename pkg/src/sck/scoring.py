"""Span- and token-level scoring of predicted context sets against gold.

Scores are per event and macro-averaged: precision, recall, and F1 are
computed individually for each event and averaged component-wise across the
evaluation set, at both the span (exact match after normalization) and the
token (SQuAD-style overlap) level.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import (
    AnnotatedPassage,
    ContextSet,
    ContextType,
    gold_contexts,
    normalize,
    tokenize,
)
from .promptgen import parse_model_output


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matched: int, pred_total: int, gold_total: int) -> "PRF":
        """PRF from match counts; both sides empty is a perfect abstention."""
        if gold_total == 0 and pred_total == 0:
            return cls(1.0, 1.0, 1.0)
        if gold_total == 0 or pred_total == 0:
            return cls(0.0, 0.0, 0.0)
        precision = matched / pred_total
        recall = matched / gold_total
        if precision + recall == 0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2 * precision * recall / (precision + recall))


@dataclass(frozen=True)
class PredictionRecord:
    """Predicted context strings for one event, from any model or baseline."""

    passage_id: str
    event_id: str
    predicted: ContextSet
    valid_parse: bool = True


@dataclass(frozen=True)
class ScoreReport:
    """Macro-averaged PRF per context type at span and token level."""

    span: dict[ContextType, PRF]
    token: dict[ContextType, PRF]
    event_count: int
    diagnostics: tuple[str, ...] = ()


def _span_counts(ctx: ContextSet, ctype: ContextType) -> Counter:
    return Counter(x for x in (normalize(s) for s in ctx.of_type(ctype)) if x)


def _token_counts(ctx: ContextSet, ctype: ContextType) -> Counter:
    return Counter(tok for s in ctx.of_type(ctype) for tok in tokenize(s))


def span_score_event(gold: ContextSet, pred: ContextSet, ctype: ContextType) -> PRF:
    """Exact-match PRF over normalized context strings (multiset semantics)."""
    g = _span_counts(gold, ctype)
    p = _span_counts(pred, ctype)
    matched = sum((g & p).values())
    return PRF.from_counts(matched, sum(p.values()), sum(g.values()))


def token_score_event(gold: ContextSet, pred: ContextSet, ctype: ContextType) -> PRF:
    """Token-overlap PRF, pooling all spans of the type on each side."""
    g = _token_counts(gold, ctype)
    p = _token_counts(pred, ctype)
    overlap = sum((g & p).values())
    return PRF.from_counts(overlap, sum(p.values()), sum(g.values()))


def index_predictions(
    preds: Iterable[PredictionRecord],
) -> dict[tuple[str, str], PredictionRecord]:
    indexed: dict[tuple[str, str], PredictionRecord] = {}
    for record in preds:
        key = (record.passage_id, record.event_id)
        if key in indexed:
            raise ValueError(f"duplicate prediction for event {key}")
        indexed[key] = record
    return indexed


def score_dataset(
    gold: Sequence[AnnotatedPassage],
    preds: Sequence[PredictionRecord],
    restrict_to_annotated: bool = False,
) -> ScoreReport:
    """Macro-average per-event scores over every event in the gold passages.

    Events without a prediction record are scored against an empty
    prediction and reported. With ``restrict_to_annotated`` the average for
    each type runs only over events carrying at least one gold context of
    that type.
    """
    indexed = index_predictions(preds)
    diagnostics = []
    matched_keys = set()

    per_type: dict[ContextType, dict[str, list[PRF]]] = {
        t: {"span": [], "token": []} for t in ContextType
    }
    event_count = 0
    for passage in gold:
        for event in passage.events:
            event_count += 1
            key = (passage.passage_id, event.id)
            record = indexed.get(key)
            if record is None:
                diagnostics.append(
                    f"no prediction for event {key}, scored as empty"
                )
                predicted = ContextSet()
            else:
                matched_keys.add(key)
                predicted = record.predicted
            gold_ctx = gold_contexts(passage, event.id)
            for ctype in ContextType:
                if restrict_to_annotated and not gold_ctx.of_type(ctype):
                    continue
                per_type[ctype]["span"].append(span_score_event(gold_ctx, predicted, ctype))
                per_type[ctype]["token"].append(token_score_event(gold_ctx, predicted, ctype))

    extra = set(indexed) - matched_keys
    for key in sorted(extra):
        diagnostics.append(f"prediction for unknown event {key} ignored")

    def mean(values: list[PRF]) -> PRF:
        if not values:
            return PRF(0.0, 0.0, 0.0)
        n = len(values)
        return PRF(
            sum(v.precision for v in values) / n,
            sum(v.recall for v in values) / n,
            sum(v.f1 for v in values) / n,
        )

    return ScoreReport(
        span={t: mean(per_type[t]["span"]) for t in ContextType},
        token={t: mean(per_type[t]["token"]) for t in ContextType},
        event_count=event_count,
        diagnostics=tuple(diagnostics),
    )


def aggregate_runs(reports: Sequence[ScoreReport]) -> ScoreReport:
    """Component-wise arithmetic mean over runs of the same evaluation set."""
    if not reports:
        raise ValueError("no reports to aggregate")
    counts = {r.event_count for r in reports}
    if len(counts) != 1:
        raise ValueError(f"mismatched event counts across runs: {sorted(counts)}")

    def mean(level: str, ctype: ContextType) -> PRF:
        values = [getattr(r, level)[ctype] for r in reports]
        n = len(values)
        return PRF(
            sum(v.precision for v in values) / n,
            sum(v.recall for v in values) / n,
            sum(v.f1 for v in values) / n,
        )

    return ScoreReport(
        span={t: mean("span", t) for t in ContextType},
        token={t: mean("token", t) for t in ContextType},
        event_count=reports[0].event_count,
    )


def report_to_dict(report: ScoreReport) -> dict:
    def level(values: Mapping[ContextType, PRF]) -> dict:
        return {
            t.value: {
                "precision": values[t].precision,
                "recall": values[t].recall,
                "f1": values[t].f1,
            }
            for t in ContextType
        }

    out = {
        "span": level(report.span),
        "token": level(report.token),
        "event_count": report.event_count,
    }
    if report.diagnostics:
        out["diagnostics"] = list(report.diagnostics)
    return out


def format_report_table(report: ScoreReport) -> str:
    """Human-readable table: Location/Temporal x Span/Token x P/R/F1."""
    lines = [
        f"{'Level':<7}{'Type':<10}{'P':>7}{'R':>7}{'F1':>7}",
        "-" * 38,
    ]
    for level_name, values in (("span", report.span), ("token", report.token)):
        for ctype in ContextType:
            prf = values[ctype]
            lines.append(
                f"{level_name:<7}{ctype.value:<10}"
                f"{prf.precision:>7.3f}{prf.recall:>7.3f}{prf.f1:>7.3f}"
            )
    lines.append(f"events: {report.event_count}")
    return "\n".join(lines)


def read_predictions_jsonl(path: str | Path) -> list[PredictionRecord]:
    """Read predictions from decoded-string or pre-parsed JSONL records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if "decoded" in d:
                    predicted, valid = parse_model_output(d["decoded"])
                else:
                    predicted = ContextSet(
                        tuple(d.get("locations", ())), tuple(d.get("times", ()))
                    )
                    valid = bool(d.get("valid_parse", True))
                records.append(
                    PredictionRecord(d["passage_id"], d["event_id"], predicted, valid)
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
    return records


def write_predictions_jsonl(path: str | Path, records: Iterable[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(
                json.dumps(
                    {
                        "passage_id": record.passage_id,
                        "event_id": record.event_id,
                        "locations": list(record.predicted.locations),
                        "times": list(record.predicted.times),
                        "valid_parse": record.valid_parse,
                    },
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
