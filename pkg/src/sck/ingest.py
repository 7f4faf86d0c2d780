"""Converters from external annotation sources into canonical passages.

Two sources are supported: LabelStudio JSON exports (gold annotations) and
markup-tagged synthetic text. Splitting and corpus statistics live here too.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Sequence

from .core import (
    AnnotatedPassage,
    ContextMention,
    ContextType,
    EventAnchor,
    Provenance,
    ScenarioRelation,
    TextSpan,
    sentence_index,
)

MARKUP_TAGS = ("evt", "loc", "nloc", "tmp", "ntmp")

_TAG_RE = re.compile(r"<(/?)([a-zA-Z][a-zA-Z0-9]*)>")

# tag -> (ctype, distractor); evt handled separately
_MENTION_TAGS = {
    "loc": (ContextType.LOCATION, False),
    "nloc": (ContextType.LOCATION, True),
    "tmp": (ContextType.TEMPORAL, False),
    "ntmp": (ContextType.TEMPORAL, True),
}


class MarkupError(ValueError):
    """Raised for malformed markup; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class LabelStudioError(ValueError):
    """Raised when a LabelStudio export cannot be parsed at all."""


def parse_markup_passage(
    text: str, passage_id: str | None = None, doc_id: str = ""
) -> AnnotatedPassage:
    """Parse one markup-tagged passage into a synthetic AnnotatedPassage.

    Tags are stripped from the text; spans carry offsets into the stripped
    text. Every loc/tmp mention is related to every event; nloc/ntmp become
    distractor mentions with no relations.
    """
    parts: list[str] = []
    out_len = 0
    tagged: list[tuple[str, int, int]] = []  # (tag, start, end) in stripped text
    open_tag: str | None = None
    open_out = 0
    open_src = 0
    pos = 0
    for m in _TAG_RE.finditer(text):
        name = m.group(2).lower()
        if name not in MARKUP_TAGS:
            raise MarkupError(f"unknown tag '{m.group(0)}'", m.start())
        parts.append(text[pos : m.start()])
        out_len += m.start() - pos
        pos = m.end()
        if m.group(1) != "/":
            if open_tag is not None:
                raise MarkupError(
                    f"tag '<{name}>' opened inside '<{open_tag}>'", m.start()
                )
            open_tag, open_out, open_src = name, out_len, m.start()
        else:
            if open_tag != name:
                raise MarkupError(f"unmatched closing tag '</{name}>'", m.start())
            if out_len == open_out:
                raise MarkupError(f"empty '<{name}>' span", open_src)
            tagged.append((name, open_out, out_len))
            open_tag = None
    if open_tag is not None:
        raise MarkupError("unclosed tag", open_src)
    parts.append(text[pos:])
    stripped = "".join(parts)

    if passage_id is None:
        digest = hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]
        passage_id = f"synth-{digest}"

    events = []
    mentions = []
    for tag, start, end in tagged:
        span = TextSpan(stripped[start:end], start, end)
        if tag == "evt":
            events.append(EventAnchor(f"e{len(events)}", span))
        else:
            ctype, distractor = _MENTION_TAGS[tag]
            mentions.append(
                ContextMention(f"m{len(mentions)}", span, ctype, distractor)
            )
    relations = tuple(
        ScenarioRelation(e.id, m.id, m.ctype)
        for e in events
        for m in mentions
        if not m.distractor
    )
    return AnnotatedPassage(
        passage_id=passage_id,
        doc_id=doc_id,
        text=stripped,
        events=tuple(events),
        mentions=tuple(mentions),
        relations=relations,
        provenance=Provenance.SYNTHETIC,
    )


def render_markup(passage: AnnotatedPassage) -> str:
    """Re-insert markup tags at the recorded offsets (inverse of parsing)."""
    items: list[tuple[int, int, str]] = []
    for e in passage.events:
        if not e.span.has_offsets:
            raise ValueError(f"event '{e.id}' has no offsets")
        items.append((e.span.char_start, e.span.char_end, "evt"))  # type: ignore[arg-type]
    for m in passage.mentions:
        if not m.span.has_offsets:
            raise ValueError(f"mention '{m.id}' has no offsets")
        if m.ctype is ContextType.LOCATION:
            tag = "nloc" if m.distractor else "loc"
        else:
            tag = "ntmp" if m.distractor else "tmp"
        items.append((m.span.char_start, m.span.char_end, tag))  # type: ignore[arg-type]
    items.sort()
    out = []
    pos = 0
    for start, end, tag in items:
        if start < pos:
            raise ValueError("overlapping spans cannot be rendered as markup")
        out.append(passage.text[pos:start])
        out.append(f"<{tag}>{passage.text[start:end]}</{tag}>")
        pos = end
    out.append(passage.text[pos:])
    return "".join(out)


def split_markup_passages(raw: str) -> list[str]:
    """Split a markup text file into passages on blank lines."""
    chunks = re.split(r"\n\s*\n", raw)
    return [c.strip() for c in chunks if c.strip()]


def load_labelstudio_config(path: str | Path | None = None) -> dict:
    """Load the pinned export field mapping (package default or an override)."""
    if path is None:
        data = resources.files("sck").joinpath("data/labelstudio_config.json").read_text("utf-8")
    else:
        data = Path(path).read_text("utf-8")
    config = json.loads(data)
    if "version" not in config:
        raise LabelStudioError("ingest config missing 'version'")
    return config


class _TaskError(ValueError):
    pass


def _first_key(data: dict, keys: Iterable[str]):
    for key in keys:
        if key in data:
            return data[key]
    return None


def _classify_label(label: str, config: dict) -> str | ContextType | None:
    low = label.lower()
    if low in (s.lower() for s in config["event_labels"]):
        return "event"
    if low in (s.lower() for s in config["location_labels"]):
        return ContextType.LOCATION
    if low in (s.lower() for s in config["temporal_labels"]):
        return ContextType.TEMPORAL
    return None


def _parse_task(task: dict, config: dict, diagnostics: list[str]) -> AnnotatedPassage:
    task_id = str(task.get("id", ""))
    data = task.get("data") or {}
    text = _first_key(data, config["text_keys"])
    if not text:
        raise _TaskError("no passage text found under " + "/".join(config["text_keys"]))
    doc_id = str(_first_key(data, config["doc_id_keys"]) or "")

    annotations = task.get("annotations") or task.get("completions") or []
    results = annotations[0].get("result", []) if annotations else []
    if len(annotations) > 1:
        diagnostics.append(
            f"task {task_id}: {len(annotations)} annotations present, using the first"
        )

    span_types = {s.lower() for s in config["span_types"]}
    relation_types = {s.lower() for s in config["relation_types"]}

    events: list[EventAnchor] = []
    mentions: list[ContextMention] = []
    kind_by_id: dict[str, str] = {}  # result id -> "event" | "mention"
    alias: dict[str, str] = {}  # duplicate event span id -> canonical id
    seen_event_offsets: dict[tuple[int, int], str] = {}
    raw_relations: list[tuple[str, str]] = []

    for result in results:
        rtype = str(result.get("type", "")).lower()
        if rtype in relation_types:
            raw_relations.append((str(result.get("from_id")), str(result.get("to_id"))))
            continue
        if rtype not in span_types:
            continue
        value = result.get("value") or {}
        rid = str(result.get("id", ""))
        try:
            start, end = int(value["start"]), int(value["end"])
        except (KeyError, TypeError, ValueError):
            diagnostics.append(f"task {task_id}: span '{rid}' lacks offsets, ignored")
            continue
        if not 0 <= start < end <= len(text):
            diagnostics.append(f"task {task_id}: span '{rid}' offsets out of range, ignored")
            continue
        labels = value.get(rtype) or value.get("labels") or []
        if not labels:
            diagnostics.append(f"task {task_id}: span '{rid}' has no label, ignored")
            continue
        kind = _classify_label(str(labels[0]), config)
        if kind is None:
            diagnostics.append(
                f"task {task_id}: span '{rid}' has unmapped label '{labels[0]}', ignored"
            )
            continue
        span_text = text[start:end]
        claimed = value.get("text")
        if claimed is not None and claimed != span_text:
            diagnostics.append(
                f"task {task_id}: span '{rid}' text differs from passage slice, "
                "using the slice"
            )
        span = TextSpan(span_text, start, end)
        if kind == "event":
            canonical = seen_event_offsets.get((start, end))
            if canonical is not None:
                alias[rid] = canonical
                kind_by_id[rid] = "event"
                continue
            seen_event_offsets[(start, end)] = rid
            events.append(EventAnchor(rid, span))
            kind_by_id[rid] = "event"
        else:
            mentions.append(ContextMention(rid, span, kind))
            kind_by_id[rid] = "mention"

    mention_types = {m.id: m.ctype for m in mentions}
    relations: list[ScenarioRelation] = []
    seen_pairs = set()
    for from_id, to_id in raw_relations:
        endpoints = []
        for rid in (from_id, to_id):
            rid = alias.get(rid, rid)
            if rid not in kind_by_id:
                raise _TaskError(f"relation references missing span id '{rid}'")
            endpoints.append((kind_by_id[rid], rid))
        kinds = {k for k, _ in endpoints}
        if kinds != {"event", "mention"}:
            raise _TaskError(
                f"relation between '{from_id}' and '{to_id}' is not an "
                "event-context pair"
            )
        event_id = next(rid for k, rid in endpoints if k == "event")
        mention_id = next(rid for k, rid in endpoints if k == "mention")
        if (event_id, mention_id) in seen_pairs:
            continue
        seen_pairs.add((event_id, mention_id))
        relations.append(ScenarioRelation(event_id, mention_id, mention_types[mention_id]))

    return AnnotatedPassage(
        passage_id=task_id or hashlib.sha1(text.encode("utf-8")).hexdigest()[:12],
        doc_id=doc_id,
        text=text,
        events=tuple(events),
        mentions=tuple(mentions),
        relations=tuple(relations),
        provenance=Provenance.GOLD,
    )


def parse_labelstudio_export(
    raw: bytes | str | IO, config: dict | None = None
) -> tuple[list[AnnotatedPassage], list[str]]:
    """Convert a LabelStudio JSON export into passages plus diagnostics.

    Tasks with unresolvable relations are skipped and reported; tasks with
    zero relations are retained (they contribute negative events).
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if config is None:
        config = load_labelstudio_config()
    try:
        tasks = json.loads(raw)
    except json.JSONDecodeError as exc:
        byte_offset = len(raw[: exc.pos].encode("utf-8"))
        raise LabelStudioError(
            f"malformed JSON at byte offset {byte_offset}: {exc.msg}"
        ) from exc
    if not isinstance(tasks, list):
        raise LabelStudioError("expected a JSON array of LabelStudio tasks")

    passages = []
    diagnostics: list[str] = []
    for index, task in enumerate(tasks):
        if not isinstance(task, dict):
            diagnostics.append(f"task #{index}: not an object, skipped")
            continue
        task_id = task.get("id", f"#{index}")
        try:
            passages.append(_parse_task(task, config, diagnostics))
        except (_TaskError, ValueError) as exc:
            diagnostics.append(f"task {task_id}: {exc}; task skipped")
    return passages, diagnostics


@dataclass(frozen=True)
class DatasetSplit:
    """A passage-level train/test partition targeting a relation fraction."""

    train: tuple[AnnotatedPassage, ...]
    test: tuple[AnnotatedPassage, ...]
    seed: int
    test_fraction: float


def split_dataset(
    passages: Sequence[AnnotatedPassage], seed: int, test_fraction: float
) -> DatasetSplit:
    """Deterministically hold out roughly ``test_fraction`` of the relations.

    Sampling is at passage granularity so a passage's relations never
    straddle the split; the test relation count lands within +-2 of the
    target whenever passage sizes permit.
    """
    if not passages:
        raise ValueError("cannot split an empty passage list")
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    ids = [p.passage_id for p in passages]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate passage_id in input")

    rng = random.Random(seed)
    with_relations = [p for p in passages if p.relations]
    without = [p for p in passages if not p.relations]
    total = sum(len(p.relations) for p in with_relations)
    target = test_fraction * total

    test_ids: set[str] = set()
    shuffled = list(with_relations)
    rng.shuffle(shuffled)
    accum = 0
    chosen: list[AnnotatedPassage] = []
    for p in shuffled:
        if accum >= target:
            break
        chosen.append(p)
        accum += len(p.relations)
    # Dropping the last pick may land closer to the target.
    if len(chosen) > 1:
        last = len(chosen[-1].relations)
        if abs(accum - last - target) < abs(accum - target):
            accum -= last
            chosen.pop()
    test_ids.update(p.passage_id for p in chosen)

    if without:
        shuffled_zero = list(without)
        rng.shuffle(shuffled_zero)
        keep = round(test_fraction * len(without))
        test_ids.update(p.passage_id for p in shuffled_zero[:keep])

    if len(test_ids) == len(passages):  # never hand everything to test
        test_ids.discard(next(iter(test_ids)))

    train = tuple(p for p in passages if p.passage_id not in test_ids)
    test = tuple(p for p in passages if p.passage_id in test_ids)
    return DatasetSplit(train=train, test=test, seed=seed, test_fraction=test_fraction)


@dataclass(frozen=True)
class CorpusStats:
    """Relation counts and inter-sentential statistics for a corpus."""

    passage_count: int
    relation_count: int
    location_relations: int
    temporal_relations: int
    intersentential_fraction: float
    distance_histogram: dict[int, int]


def corpus_stats(passages: Sequence[AnnotatedPassage]) -> CorpusStats:
    """Count relations per type and measure event-to-mention sentence distances.

    Relations whose event or mention lacks offsets are excluded from the
    histogram and from the inter-sentential denominator.
    """
    relation_count = 0
    location_relations = 0
    temporal_relations = 0
    histogram: dict[int, int] = {}
    measurable = 0
    inter = 0
    for p in passages:
        events = p.events_by_id()
        mentions = p.mentions_by_id()
        for r in p.relations:
            relation_count += 1
            if r.ctype is ContextType.LOCATION:
                location_relations += 1
            else:
                temporal_relations += 1
            e_span = events[r.event_id].span
            m_span = mentions[r.mention_id].span
            if not (e_span.has_offsets and m_span.has_offsets):
                continue
            distance = abs(
                sentence_index(p.text, e_span.char_start)  # type: ignore[arg-type]
                - sentence_index(p.text, m_span.char_start)  # type: ignore[arg-type]
            )
            histogram[distance] = histogram.get(distance, 0) + 1
            measurable += 1
            if distance >= 1:
                inter += 1
    fraction = inter / measurable if measurable else 0.0
    return CorpusStats(
        passage_count=len(passages),
        relation_count=relation_count,
        location_relations=location_relations,
        temporal_relations=temporal_relations,
        intersentential_fraction=fraction,
        distance_histogram=dict(sorted(histogram.items())),
    )


def stats_to_dict(stats: CorpusStats) -> dict:
    return {
        "passage_count": stats.passage_count,
        "relation_count": stats.relation_count,
        "location_relations": stats.location_relations,
        "temporal_relations": stats.temporal_relations,
        "intersentential_fraction": stats.intersentential_fraction,
        "distance_histogram": {str(k): v for k, v in stats.distance_histogram.items()},
    }
