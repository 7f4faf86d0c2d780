"""The two untrained baselines: zero-shot LLM elicitation and SRL containment.

The LLM baseline prompts a chat model for a JSON object per event; the SRL
baseline consumes pre-parsed frame files and checks argument containment.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .augment import ChatClient, ChatError, ChatRequest, load_prompt, render_prompt
from .core import AnnotatedPassage, ContextSet, ContextType, normalize
from .scoring import PRF, PredictionRecord

MODIFIER_LABELS = {
    ContextType.LOCATION: "ARGM-LOC",
    ContextType.TEMPORAL: "ARGM-TMP",
}


@dataclass(frozen=True)
class SrlArgument:
    """One labeled argument span of a predicate."""

    label: str
    text: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("argument label must be non-empty")


@dataclass(frozen=True)
class SrlFrame:
    """One predicate with its labeled arguments."""

    predicate_text: str
    arguments: tuple[SrlArgument, ...]
    sentence_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "arguments", tuple(self.arguments))
        if not self.predicate_text:
            raise ValueError("predicate text must be non-empty")


def build_llm_baseline_prompt(event_text: str, pre_context: str, post_context: str) -> str:
    """Instantiate the elicitation template around a backticked event."""
    if not event_text:
        raise ValueError("event text must be non-empty")
    return render_prompt(
        load_prompt("llm_baseline.txt"),
        pre_context=pre_context,
        event=event_text,
        post_context=post_context,
    )


def _first_json_object(raw: str) -> dict | None:
    decoder = json.JSONDecoder()
    for i, ch in enumerate(raw):
        if ch != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(raw[i:])
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def _string_items(value: object) -> list[str]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        return []
    return [x for x in (normalize(str(item)) for item in value) if x]


def parse_llm_baseline_output(raw: str) -> tuple[ContextSet, bool]:
    """Extract the first JSON object from a reply, tolerating prose and fences.

    Never raises; replies without a recognizable object (or with neither
    expected key) yield an empty set flagged invalid.
    """
    obj = _first_json_object(raw)
    if obj is None or ("locations" not in obj and "time periods" not in obj):
        return ContextSet(), False
    locations = _string_items(obj.get("locations"))
    times = _string_items(obj.get("time periods"))
    return ContextSet(tuple(locations), tuple(times)), True


def run_llm_baseline(
    gold: Sequence[AnnotatedPassage],
    client: ChatClient,
    model_name: str,
    temperature: float = 0.0,
    max_tokens: int = 512,
    parallelism: int = 1,
) -> tuple[list[PredictionRecord], list[str]]:
    """One prediction per gold event; failed calls become flagged empty records."""
    jobs: list[tuple[str, str, str]] = []
    for p in gold:
        for e in p.events:
            if not e.span.has_offsets:
                raise ValueError(
                    f"event '{e.id}' in passage '{p.passage_id}' has no offsets; "
                    "cannot slice pre/post context"
                )
            prompt = build_llm_baseline_prompt(
                e.span.text,
                p.text[: e.span.char_start],
                p.text[e.span.char_end :],
            )
            jobs.append((p.passage_id, e.id, prompt))

    def call(job: tuple[str, str, str]) -> str | Exception:
        try:
            return client.complete(
                ChatRequest(
                    user=job[2],
                    model_name=model_name,
                    temperature=temperature,
                    max_tokens=max_tokens,
                )
            )
        except ChatError as exc:
            return exc

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            replies = list(pool.map(call, jobs))
    else:
        replies = [call(j) for j in jobs]

    records = []
    diagnostics = []
    for (passage_id, event_id, _), reply in zip(jobs, replies):
        if isinstance(reply, Exception):
            diagnostics.append(f"event ({passage_id}, {event_id}): chat failure: {reply}")
            records.append(PredictionRecord(passage_id, event_id, ContextSet(), False))
            continue
        predicted, valid = parse_llm_baseline_output(reply)
        if not valid:
            diagnostics.append(f"event ({passage_id}, {event_id}): unparseable reply")
        records.append(PredictionRecord(passage_id, event_id, predicted, valid))
    return records, diagnostics


def _covers_event(frame: SrlFrame, skip: SrlArgument, event_norm: str) -> bool:
    """Clause (b): some other argument plus the predicate contains the event.

    The parse file carries no offsets, so both concatenation orders stand in
    for document order.
    """
    predicate = normalize(frame.predicate_text)
    for argument in frame.arguments:
        if argument is skip:
            continue
        arg_norm = normalize(argument.text)
        if event_norm in f"{arg_norm} {predicate}" or event_norm in f"{predicate} {arg_norm}":
            return True
    return False


def srl_match(
    event_text: str,
    context_text: str,
    ctype: ContextType,
    frames: Sequence[SrlFrame],
) -> bool:
    """True iff some frame extracts this relation under the containment rule.

    A frame matches when a modifier argument of the right label contains the
    context text and another argument of the same frame, joined with the
    predicate, contains the event text (all after normalization).
    """
    label = MODIFIER_LABELS[ctype]
    context_norm = normalize(context_text)
    event_norm = normalize(event_text)
    if not context_norm or not event_norm:
        return False
    for frame in frames:
        for argument in frame.arguments:
            if argument.label.upper() != label:
                continue
            if context_norm not in normalize(argument.text):
                continue
            if _covers_event(frame, argument, event_norm):
                return True
    return False


def score_srl_baseline(
    gold: Sequence[AnnotatedPassage],
    parses: Mapping[str, Sequence[SrlFrame]],
) -> dict[ContextType, PRF]:
    """Micro-averaged PRF of the SRL containment baseline, per context type.

    False positives are modifier arguments of the type's label that cover
    some gold event but contain none of that event's gold contexts.
    """
    tp = {t: 0 for t in ContextType}
    fn = {t: 0 for t in ContextType}
    fp = {t: 0 for t in ContextType}
    for p in gold:
        if p.events and p.passage_id not in parses:
            raise ValueError(f"missing SRL parse for passage '{p.passage_id}'")
        frames = list(parses.get(p.passage_id, ()))
        mentions = p.mentions_by_id()
        events = p.events_by_id()

        gold_ctx: dict[tuple[str, ContextType], list[str]] = {}
        for r in p.relations:
            key = (r.event_id, r.ctype)
            gold_ctx.setdefault(key, []).append(normalize(mentions[r.mention_id].span.text))

        for r in p.relations:
            matched = srl_match(
                events[r.event_id].span.text,
                mentions[r.mention_id].span.text,
                r.ctype,
                frames,
            )
            if matched:
                tp[r.ctype] += 1
            else:
                fn[r.ctype] += 1

        for frame in frames:
            for argument in frame.arguments:
                ctype = next(
                    (t for t, lbl in MODIFIER_LABELS.items() if argument.label.upper() == lbl),
                    None,
                )
                if ctype is None:
                    continue
                modifier_norm = normalize(argument.text)
                for e in p.events:
                    event_norm = normalize(e.span.text)
                    if not event_norm or not _covers_event(frame, argument, event_norm):
                        continue
                    contexts = gold_ctx.get((e.id, ctype), [])
                    if not any(c and c in modifier_norm for c in contexts):
                        fp[ctype] += 1
                        break

    return {
        t: PRF.from_counts(tp[t], tp[t] + fp[t], tp[t] + fn[t]) for t in ContextType
    }


def read_srl_parses(path: str | Path) -> dict[str, list[SrlFrame]]:
    """Read per-passage frame files: one object per passage, frames by sentence."""
    parses: dict[str, list[SrlFrame]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                frames = []
                for sentence in d.get("sentences", ()):
                    index = int(sentence.get("index", 0))
                    for f in sentence.get("frames", ()):
                        frames.append(
                            SrlFrame(
                                predicate_text=f["predicate"],
                                arguments=tuple(
                                    SrlArgument(a["label"], a["text"])
                                    for a in f.get("arguments", ())
                                ),
                                sentence_index=index,
                            )
                        )
                parses[d["passage_id"]] = frames
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad SRL record: {exc}") from exc
    return parses
