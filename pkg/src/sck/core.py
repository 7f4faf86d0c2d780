"""Shared domain types and the text primitives every metric depends on."""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable


class ContextType(Enum):
    """The two annotated scenario-context classes."""

    LOCATION = "location"
    TEMPORAL = "temporal"


class Provenance(Enum):
    """How a passage entered the corpus."""

    GOLD = "gold"
    PARAPHRASE = "paraphrase"
    SYNTHETIC = "synthetic"


def normalize(text: str) -> str:
    """Lowercase, drop commas, trim, and collapse internal whitespace runs.

    Idempotent; the single normalization applied before any string comparison.
    """
    return " ".join(text.lower().replace(",", "").split())


def tokenize(text: str) -> list[str]:
    """Whitespace tokens of the normalized text (possibly empty, never '')."""
    return normalize(text).split()


_SENTENCE_TERMINATORS = frozenset(".!?")


def sentence_starts(text: str) -> list[int]:
    """Offsets where a new sentence begins.

    A sentence ends after '.', '!' or '?' when the next character is
    whitespace; abbreviations are not special-cased. Text without a
    terminator is a single sentence.
    """
    starts = []
    for i in range(len(text) - 1):
        if text[i] in _SENTENCE_TERMINATORS and text[i + 1].isspace():
            starts.append(i + 1)
    return starts


def sentence_index(passage_text: str, char_offset: int) -> int:
    """Zero-based index of the sentence containing ``char_offset``."""
    if not 0 <= char_offset < len(passage_text):
        raise ValueError(
            f"char offset {char_offset} out of range for passage of length "
            f"{len(passage_text)}"
        )
    return bisect.bisect_right(sentence_starts(passage_text), char_offset)


@dataclass(frozen=True)
class TextSpan:
    """A surface string, optionally anchored at character offsets (end exclusive)."""

    text: str
    char_start: int | None = None
    char_end: int | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("span text must be non-empty")
        if (self.char_start is None) != (self.char_end is None):
            raise ValueError("char_start and char_end must be set together")
        if self.char_start is not None and (
            self.char_start < 0 or self.char_end <= self.char_start  # type: ignore[operator]
        ):
            raise ValueError(f"bad span offsets ({self.char_start}, {self.char_end})")

    @property
    def has_offsets(self) -> bool:
        return self.char_start is not None


@dataclass(frozen=True)
class EventAnchor:
    """A text span to which scenario context is attached."""

    id: str
    span: TextSpan

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("event id must be non-empty")


@dataclass(frozen=True)
class ContextMention:
    """A location or temporal expression span in a passage."""

    id: str
    span: TextSpan
    ctype: ContextType
    distractor: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("mention id must be non-empty")


@dataclass(frozen=True)
class ScenarioRelation:
    """One arrow from an event anchor to a context mention."""

    event_id: str
    mention_id: str
    ctype: ContextType


@dataclass(frozen=True)
class AnnotatedPassage:
    """A passage with its events, context mentions, relations, and provenance."""

    passage_id: str
    doc_id: str
    text: str
    events: tuple[EventAnchor, ...] = ()
    mentions: tuple[ContextMention, ...] = ()
    relations: tuple[ScenarioRelation, ...] = ()
    provenance: Provenance = Provenance.GOLD

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "mentions", tuple(self.mentions))
        object.__setattr__(self, "relations", tuple(self.relations))
        self._validate()

    def _validate(self) -> None:
        if not self.passage_id:
            raise ValueError("passage_id must be non-empty")
        if not self.text:
            raise ValueError("passage text must be non-empty")
        events: dict[str, EventAnchor] = {}
        anchored = set()
        for e in self.events:
            if e.id in events:
                raise ValueError(f"duplicate event id '{e.id}'")
            events[e.id] = e
            self._check_span(e.span, f"event '{e.id}'")
            if e.span.has_offsets:
                key = (e.span.char_start, e.span.char_end)
                if key in anchored:
                    raise ValueError(f"two event anchors share offsets {key}")
                anchored.add(key)
        mentions: dict[str, ContextMention] = {}
        for m in self.mentions:
            if m.id in mentions:
                raise ValueError(f"duplicate mention id '{m.id}'")
            mentions[m.id] = m
            self._check_span(m.span, f"mention '{m.id}'")
        pairs = set()
        for r in self.relations:
            if r.event_id not in events:
                raise ValueError(f"relation references unknown event '{r.event_id}'")
            m = mentions.get(r.mention_id)
            if m is None:
                raise ValueError(f"relation references unknown mention '{r.mention_id}'")
            if m.distractor:
                raise ValueError(f"relation targets distractor mention '{m.id}'")
            if r.ctype is not m.ctype:
                raise ValueError(
                    f"relation type '{r.ctype.value}' does not match mention "
                    f"'{m.id}' ('{m.ctype.value}')"
                )
            key = (r.event_id, r.mention_id)
            if key in pairs:
                raise ValueError(f"duplicate relation {key}")
            pairs.add(key)

    def _check_span(self, span: TextSpan, what: str) -> None:
        if not span.has_offsets:
            return
        if span.char_end > len(self.text):  # type: ignore[operator]
            raise ValueError(f"{what} span ends past the passage text")
        actual = self.text[span.char_start : span.char_end]
        if actual != span.text:
            raise ValueError(
                f"{what} span text {span.text!r} does not match passage slice {actual!r}"
            )

    def events_by_id(self) -> dict[str, EventAnchor]:
        return {e.id: e for e in self.events}

    def mentions_by_id(self) -> dict[str, ContextMention]:
        return {m.id: m for m in self.mentions}


@dataclass(frozen=True)
class ContextSet:
    """Location and time strings for one event; order preserved, multiset semantics."""

    locations: tuple[str, ...] = ()
    times: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "times", tuple(self.times))
        for item in self.locations + self.times:
            if not normalize(item):
                raise ValueError("context strings must be non-empty after normalization")

    def of_type(self, ctype: ContextType) -> tuple[str, ...]:
        return self.locations if ctype is ContextType.LOCATION else self.times

    @property
    def is_empty(self) -> bool:
        return not self.locations and not self.times


def gold_contexts(passage: AnnotatedPassage, event_id: str) -> ContextSet:
    """Normalized gold context strings for one event, in passage order.

    Mentions without offsets keep their list order, after any anchored ones.
    """
    if event_id not in passage.events_by_id():
        raise ValueError(f"unknown event '{event_id}' in passage '{passage.passage_id}'")
    order = {m.id: i for i, m in enumerate(passage.mentions)}
    mentions = passage.mentions_by_id()
    picked = []
    for r in passage.relations:
        if r.event_id != event_id:
            continue
        m = mentions[r.mention_id]
        start = m.span.char_start if m.span.has_offsets else len(passage.text)
        picked.append((start, order[m.id], m))
    picked.sort(key=lambda t: (t[0], t[1]))
    locations = tuple(
        normalize(m.span.text) for _, _, m in picked if m.ctype is ContextType.LOCATION
    )
    times = tuple(
        normalize(m.span.text) for _, _, m in picked if m.ctype is ContextType.TEMPORAL
    )
    return ContextSet(locations, times)


def _span_to_dict(span: TextSpan) -> dict:
    d: dict = {"text": span.text}
    if span.has_offsets:
        d["char_start"] = span.char_start
        d["char_end"] = span.char_end
    return d


def _span_from_dict(d: dict) -> TextSpan:
    return TextSpan(d["text"], d.get("char_start"), d.get("char_end"))


def passage_to_dict(p: AnnotatedPassage) -> dict:
    return {
        "passage_id": p.passage_id,
        "doc_id": p.doc_id,
        "text": p.text,
        "events": [{"id": e.id, "span": _span_to_dict(e.span)} for e in p.events],
        "mentions": [
            {
                "id": m.id,
                "span": _span_to_dict(m.span),
                "ctype": m.ctype.value,
                "distractor": m.distractor,
            }
            for m in p.mentions
        ],
        "relations": [
            {"event_id": r.event_id, "mention_id": r.mention_id, "ctype": r.ctype.value}
            for r in p.relations
        ],
        "provenance": p.provenance.value,
    }


def passage_from_dict(d: dict) -> AnnotatedPassage:
    return AnnotatedPassage(
        passage_id=d["passage_id"],
        doc_id=d.get("doc_id", ""),
        text=d["text"],
        events=tuple(
            EventAnchor(e["id"], _span_from_dict(e["span"])) for e in d.get("events", ())
        ),
        mentions=tuple(
            ContextMention(
                m["id"],
                _span_from_dict(m["span"]),
                ContextType(m["ctype"]),
                bool(m.get("distractor", False)),
            )
            for m in d.get("mentions", ())
        ),
        relations=tuple(
            ScenarioRelation(r["event_id"], r["mention_id"], ContextType(r["ctype"]))
            for r in d.get("relations", ())
        ),
        provenance=Provenance(d.get("provenance", "gold")),
    )


def write_passages_jsonl(path: str | Path, passages: Iterable[AnnotatedPassage]) -> None:
    """Write the canonical dataset file: one passage object per line, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in passages:
            fh.write(json.dumps(passage_to_dict(p), ensure_ascii=False))
            fh.write("\n")


def read_passages_jsonl(path: str | Path) -> list[AnnotatedPassage]:
    passages = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                passages.append(passage_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad passage record: {exc}") from exc
    return passages
