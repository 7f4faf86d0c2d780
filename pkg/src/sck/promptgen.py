"""Serialization between passages and the model's input/output sequences."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import AnnotatedPassage, ContextSet, gold_contexts, normalize


@dataclass(frozen=True)
class TrainingPair:
    """One (input, target) sequence pair for a single event."""

    input: str
    target: str
    passage_id: str
    event_id: str


def build_input_prompt(event_text: str, passage_text: str) -> str:
    """Serialize an (event, passage) pair into the model input prompt."""
    if not event_text:
        raise ValueError("event text must be non-empty")
    if not passage_text:
        raise ValueError("passage text must be non-empty")
    return f"Text: {event_text}\n\nContext: {passage_text}"


def build_target_sequence(ctx: ContextSet) -> str:
    """Serialize a ContextSet into the model target sequence.

    Elements must already be normalized (hence comma-free); an empty side
    keeps its label with an empty value.
    """
    for item in ctx.locations + ctx.times:
        if ";" in item or "," in item:
            raise ValueError(f"target element contains a delimiter: {item!r}")
    return "location: " + ", ".join(ctx.locations) + "; time: " + ", ".join(ctx.times)


_LOCATION_LABEL = re.compile(r"^\s*location\s*:", re.IGNORECASE)
_TIME_LABEL = re.compile(r"^\s*time\s*:", re.IGNORECASE)


def parse_model_output(decoded: str) -> tuple[ContextSet, bool]:
    """Parse a decoded sequence back into a ContextSet.

    Never raises: output that carries neither a location nor a time label
    degrades to an empty set with the validity flag False.
    """
    head, sep, tail = decoded.partition(";")
    segments = [head, tail] if sep else [head]
    locations: list[str] = []
    times: list[str] = []
    labelled = False
    for position, segment in enumerate(segments):
        match = _LOCATION_LABEL.match(segment)
        if match:
            bucket = locations
            segment = segment[match.end() :]
            labelled = True
        else:
            match = _TIME_LABEL.match(segment)
            if match:
                bucket = times
                segment = segment[match.end() :]
                labelled = True
            else:
                bucket = locations if position == 0 else times
        bucket.extend(x for x in (normalize(item) for item in segment.split(",")) if x)
    if not labelled:
        return ContextSet(), False
    return ContextSet(tuple(locations), tuple(times)), True


def training_pairs(passages: Sequence[AnnotatedPassage]) -> list[TrainingPair]:
    """One pair per event over all passages, decoding all contexts at once."""
    pairs = []
    for p in passages:
        for e in p.events:
            ctx = gold_contexts(p, e.id)
            pairs.append(
                TrainingPair(
                    input=build_input_prompt(e.span.text, p.text),
                    target=build_target_sequence(ctx),
                    passage_id=p.passage_id,
                    event_id=e.id,
                )
            )
    return pairs


def write_training_jsonl(path: str | Path, pairs: Iterable[TrainingPair]) -> None:
    """Write the training file the trainer consumes."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {
                "input": pair.input,
                "target": pair.target,
                "passage_id": pair.passage_id,
                "event_id": pair.event_id,
            }
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def read_training_jsonl(path: str | Path) -> list[TrainingPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                pairs.append(
                    TrainingPair(d["input"], d["target"], d["passage_id"], d["event_id"])
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad training record: {exc}") from exc
    return pairs
