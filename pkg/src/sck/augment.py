"""LLM-backed data augmentation: paraphrasing and procedural generation.

Every passage emitted here passes :func:`validate_augmented`; variants that
lose track of their relations are discarded and reported, never repaired.
"""

from __future__ import annotations

import os
import re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Protocol, Sequence

import requests

from .core import (
    AnnotatedPassage,
    ContextMention,
    ContextType,
    EventAnchor,
    Provenance,
    ScenarioRelation,
    TextSpan,
    normalize,
    tokenize,
)
from .ingest import MarkupError, parse_markup_passage

API_KEY_ENV = "SCK_LLM_API_KEY"


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call, provider-agnostic."""

    user: str
    model_name: str
    system: str | None = None
    temperature: float = 0.7
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.user:
            raise ValueError("user message must be non-empty")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")


class ChatError(RuntimeError):
    """A chat call failed after exhausting retries."""


class ChatClient(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class HttpChatClient:
    """Minimal client for an OpenAI-style chat-completions endpoint.

    The API key comes from the SCK_LLM_API_KEY environment variable unless
    passed explicitly; transient transport failures are retried with backoff.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        retries: int = 3,
        timeout: float = 120.0,
        backoff: float = 2.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        self.session = session or requests.Session()

    def complete(self, request: ChatRequest) -> str:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        payload = {
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(
                    url, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return response.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise ChatError(f"chat call failed after {self.retries + 1} attempts: {last}")


def load_prompt(name: str) -> str:
    """Load a prompt template shipped with the package."""
    text = resources.files("sck").joinpath(f"prompts/{name}").read_text("utf-8")
    return text.rstrip("\n")


def render_prompt(template: str, **fields: object) -> str:
    """Substitute {placeholders}; literal braces elsewhere are left alone."""
    for key, value in fields.items():
        template = template.replace("{" + key + "}", str(value))
    return template


@dataclass(frozen=True)
class GenerationPlan:
    """Controls for the procedural generation pipeline."""

    event_types: tuple[str, ...]
    names_per_type: int = 10
    roles_per_type: int = 5
    lengths: tuple[str, ...] = ("one paragraph",)
    loc_distractors: int = 1
    tmp_distractors: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "event_types", tuple(self.event_types))
        object.__setattr__(self, "lengths", tuple(self.lengths))
        if not self.event_types:
            raise ValueError("at least one event type is required")
        if not self.lengths:
            raise ValueError("at least one length is required")
        if self.names_per_type < 1 or self.roles_per_type < 1:
            raise ValueError("names_per_type and roles_per_type must be >= 1")
        if self.loc_distractors < 0 or self.tmp_distractors < 0:
            raise ValueError("distractor counts must be >= 0")


def validate_augmented(p: AnnotatedPassage) -> list[str]:
    """Check that relation bookkeeping survived generation.

    Returns one violation string per problem; an empty list means valid.
    """
    violations = []
    for e in p.events:
        if e.span.text not in p.text:
            violations.append(f"event '{e.span.text}' not found in text")
    related = {r.mention_id for r in p.relations}
    true_texts = [normalize(m.span.text) for m in p.mentions if not m.distractor]
    for m in p.mentions:
        if m.id in related and m.span.text not in p.text:
            violations.append(f"mention '{m.span.text}' not found in text")
        if m.distractor and normalize(m.span.text) in true_texts:
            violations.append(
                f"distractor '{m.span.text}' equals a true context after normalization"
            )
    return violations


def _allocate_offsets(text: str, needles: list[str]) -> dict[int, tuple[int, int] | None]:
    """Assign successive occurrences of each needle; None when exhausted."""
    cursor: dict[str, int] = {}
    out: dict[int, tuple[int, int] | None] = {}
    for i, needle in enumerate(needles):
        start = text.find(needle, cursor.get(needle, 0))
        if start < 0:
            # Re-mentions may collapse during rephrasing; fall back to the
            # first occurrence so the span stays anchored if it exists at all.
            start = text.find(needle)
            out[i] = (start, start + len(needle)) if start >= 0 else None
            continue
        cursor[needle] = start + 1
        out[i] = (start, start + len(needle))
    return out


def _rebuild_passage(
    seed: AnnotatedPassage,
    new_text: str,
    variant_id: str,
    text_map: dict[str, str] | None = None,
) -> AnnotatedPassage:
    """Re-anchor a seed passage's spans inside rewritten text.

    Spans that cannot be found are kept without offsets so that
    validate_augmented reports them; unrelated mentions that vanished are
    dropped silently (they carry no relations).
    """
    text_map = text_map or {}
    related = {r.mention_id for r in seed.relations}

    event_texts = [text_map.get(e.span.text, e.span.text) for e in seed.events]
    offsets = _allocate_offsets(new_text, event_texts)
    events: list[EventAnchor] = []
    alias: dict[str, str] = {}
    by_offsets: dict[tuple[int, int], str] = {}
    for i, e in enumerate(seed.events):
        span_text = event_texts[i]
        span_at = offsets[i]
        if span_at is not None and span_at in by_offsets:
            # Rephrasing merged two re-mentions into one anchor.
            alias[e.id] = by_offsets[span_at]
            continue
        if span_at is not None:
            by_offsets[span_at] = e.id
            events.append(EventAnchor(e.id, TextSpan(span_text, *span_at)))
        else:
            events.append(EventAnchor(e.id, TextSpan(span_text)))

    mention_texts = [text_map.get(m.span.text, m.span.text) for m in seed.mentions]
    cursor: dict[str, int] = {}
    mentions: list[ContextMention] = []
    kept = set()
    for i, m in enumerate(seed.mentions):
        span_text = mention_texts[i]
        start = new_text.find(span_text, cursor.get(span_text, 0))
        if start < 0:
            start = new_text.find(span_text)
        else:
            cursor[span_text] = start + 1
        if start < 0:
            if m.id not in related:
                continue
            span = TextSpan(span_text)
        else:
            span = TextSpan(span_text, start, start + len(span_text))
        mentions.append(ContextMention(m.id, span, m.ctype, m.distractor))
        kept.add(m.id)

    seen = set()
    relations = []
    for r in seed.relations:
        event_id = alias.get(r.event_id, r.event_id)
        if r.mention_id not in kept or (event_id, r.mention_id) in seen:
            continue
        seen.add((event_id, r.mention_id))
        relations.append(ScenarioRelation(event_id, r.mention_id, r.ctype))

    return AnnotatedPassage(
        passage_id=variant_id,
        doc_id=seed.doc_id,
        text=new_text,
        events=tuple(events),
        mentions=tuple(mentions),
        relations=tuple(relations),
        provenance=Provenance.PARAPHRASE,
    )


def _clean_reply(reply: str) -> str:
    return reply.strip().strip("`'\"").strip()


def _protected_phrases(p: AnnotatedPassage) -> list[str]:
    related = {r.mention_id for r in p.relations}
    phrases = [e.span.text for e in p.events]
    phrases += [m.span.text for m in p.mentions if m.id in related]
    out = []
    for phrase in phrases:  # de-dup, keep order
        if phrase not in out:
            out.append(phrase)
    return out


def _pick_swap_word(p: AnnotatedPassage) -> str | None:
    protected = " ".join(normalize(t) for t in _protected_phrases(p))
    counts = Counter(
        t for t in tokenize(p.text) if len(t) >= 4 and t.isalpha() and t not in protected
    )
    if not counts:
        return None
    return max(counts, key=lambda t: (counts[t], t))


def paraphrase_passage(
    p: AnnotatedPassage,
    client: ChatClient,
    model_name: str,
    temperature: float = 0.7,
    max_tokens: int = 1024,
    word_swaps: Sequence[tuple[str, str]] | None = None,
) -> tuple[list[AnnotatedPassage], list[str]]:
    """Generate paraphrase variants of one gold passage.

    Applies the full prompt suite: location substitution, date substitution,
    rephrasing with each protected phrase kept fixed, free rephrasing, and
    word replacement. Invalid variants are discarded and reported.
    """
    if p.provenance is not Provenance.GOLD:
        raise ValueError("only gold passages are paraphrased")

    def ask(template_name: str, system: str | None = None, **fields: object) -> str:
        prompt = render_prompt(load_prompt(template_name), **fields)
        return client.complete(
            ChatRequest(
                user=prompt,
                model_name=model_name,
                system=system,
                temperature=temperature,
                max_tokens=max_tokens,
            )
        )

    variants: list[tuple[str, str, dict[str, str]]] = []  # (route, new_text, text_map)
    diagnostics: list[str] = []
    related = {r.mention_id for r in p.relations}

    def substitution_route(route: str, ctype: ContextType, template: str, field_name: str):
        texts = []
        for m in p.mentions:
            if m.id in related and m.ctype is ctype and m.span.text not in texts:
                texts.append(m.span.text)
        if not texts:
            return
        text_map = {}
        for old in texts:
            replacement = _clean_reply(ask(template, **{field_name: old}))
            if replacement and replacement != old:
                text_map[old] = replacement
            else:
                diagnostics.append(f"{p.passage_id}: no usable substitute for '{old}'")
        if not text_map:
            return
        new_text = p.text
        for old, new in text_map.items():
            new_text = new_text.replace(old, new)
        variants.append((route, new_text, text_map))

    try:
        substitution_route("locsub", ContextType.LOCATION, "paraphrase_location.txt", "location")
        substitution_route("datesub", ContextType.TEMPORAL, "paraphrase_date.txt", "date")

        for i, phrase in enumerate(_protected_phrases(p)):
            new_text = ask("paraphrase_fixed.txt", phrase=phrase, text=p.text).strip()
            if new_text:
                variants.append((f"fixed{i}", new_text, {}))

        free = ask("paraphrase_free.txt", text=p.text).strip()
        if free:
            variants.append(("free", free, {}))

        swaps = list(word_swaps) if word_swaps else []
        if not swaps:
            word = _pick_swap_word(p)
            if word is None:
                diagnostics.append(f"{p.passage_id}: no swappable word found")
            else:
                replacement = _clean_reply(ask("paraphrase_word_pick.txt", word=word))
                if replacement and normalize(replacement) != word:
                    swaps.append((word, replacement))
                else:
                    diagnostics.append(f"{p.passage_id}: no usable replacement for '{word}'")
        for word, replacement in swaps:
            swapped = ask(
                "paraphrase_word.txt", word=word, replacement=replacement, text=p.text
            ).strip()
            if swapped:
                variants.append((f"wordswap-{word}", swapped, {}))
    except ChatError as exc:
        diagnostics.append(f"{p.passage_id}: chat failure: {exc}")

    accepted = []
    for index, (route, new_text, text_map) in enumerate(variants):
        variant_id = f"{p.passage_id}-para{index}-{route}"
        try:
            candidate = _rebuild_passage(p, new_text, variant_id, text_map)
        except ValueError as exc:
            diagnostics.append(f"{variant_id}: discarded ({exc})")
            continue
        problems = validate_augmented(candidate)
        if problems:
            diagnostics.append(f"{variant_id}: discarded ({'; '.join(problems)})")
            continue
        accepted.append(candidate)
    if variants and not accepted:
        diagnostics.append(f"{p.passage_id}: all {len(variants)} variants invalid")
    return accepted, diagnostics


def paraphrase_corpus(
    passages: Sequence[AnnotatedPassage],
    client: ChatClient,
    model_name: str,
    temperature: float = 0.7,
    max_tokens: int = 1024,
    word_swaps: Sequence[tuple[str, str]] | None = None,
    parallelism: int = 1,
) -> tuple[list[AnnotatedPassage], list[str]]:
    """Paraphrase every gold passage; output order follows the input order."""
    gold = [p for p in passages if p.provenance is Provenance.GOLD]

    def job(p: AnnotatedPassage):
        return paraphrase_passage(
            p, client, model_name, temperature, max_tokens, word_swaps
        )

    results: list[tuple[list[AnnotatedPassage], list[str]]]
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(job, gold))
    else:
        results = [job(p) for p in gold]

    out: list[AnnotatedPassage] = []
    diagnostics: list[str] = []
    for accepted, diag in results:
        out.extend(accepted)
        diagnostics.extend(diag)
    return out, diagnostics


def parse_list_reply(reply: str) -> list[str]:
    """Items from a comma-separated reply, tolerating newlines and numbering."""
    parts = re.split(r"[,\n]", reply)
    items = []
    for part in parts:
        item = re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", part).strip().strip("`'\" .")
        if item:
            items.append(item)
    return items


def generate_synthetic(
    plan: GenerationPlan,
    client: ChatClient,
    model_name: str,
    temperature: float = 0.7,
    max_tokens: int = 1024,
    parallelism: int = 1,
) -> tuple[list[AnnotatedPassage], list[str]]:
    """Run the three-stage pipeline: event names, narrator roles, narrations.

    Narrations that fail markup parsing, carry the wrong distractor counts,
    or fail validation are discarded with diagnostics.
    """
    diagnostics: list[str] = []

    def ask(template_name: str, system: str | None = None, **fields: object) -> str:
        prompt = render_prompt(load_prompt(template_name), **fields)
        return client.complete(
            ChatRequest(
                user=prompt,
                model_name=model_name,
                system=system,
                temperature=temperature,
                max_tokens=max_tokens,
            )
        )

    jobs: list[tuple[str, str, str, str, str]] = []  # (pid, event_type, name, role, length)
    for et_index, event_type in enumerate(plan.event_types):
        try:
            names_reply = ask(
                "synthetic_event_names.txt", count=plan.names_per_type, event_type=event_type
            )
            roles_reply = ask(
                "synthetic_narrator_roles.txt", count=plan.roles_per_type, event_type=event_type
            )
        except ChatError as exc:
            diagnostics.append(f"event type '{event_type}': chat failure: {exc}")
            continue
        names = parse_list_reply(names_reply)
        if len(names) < plan.names_per_type:
            diagnostics.append(
                f"event type '{event_type}': asked for {plan.names_per_type} names, "
                f"got {len(names)}"
            )
        names = names[: plan.names_per_type]
        roles = parse_list_reply(roles_reply)
        if len(roles) < plan.roles_per_type:
            diagnostics.append(
                f"event type '{event_type}': asked for {plan.roles_per_type} roles, "
                f"got {len(roles)}"
            )
        roles = roles[: plan.roles_per_type]
        for n_index, name in enumerate(names):
            for r_index, role in enumerate(roles):
                for l_index, length in enumerate(plan.lengths):
                    pid = f"synth-{et_index}-{n_index}-{r_index}-{l_index}"
                    jobs.append((pid, event_type, name, role, length))

    def narrate(job: tuple[str, str, str, str, str]) -> str | Exception:
        pid, event_type, name, role, length = job
        try:
            return ask(
                "synthetic_narration_user.txt",
                system=render_prompt(
                    load_prompt("synthetic_narration_system.txt"),
                    role=role,
                    event_type=event_type,
                ),
                length=length,
                event=name,
                loc_distractors=plan.loc_distractors,
                tmp_distractors=plan.tmp_distractors,
            )
        except ChatError as exc:
            return exc

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            narrations = list(pool.map(narrate, jobs))
    else:
        narrations = [narrate(j) for j in jobs]

    passages = []
    for (pid, event_type, name, role, length), narration in zip(jobs, narrations):
        if isinstance(narration, Exception):
            diagnostics.append(f"{pid}: chat failure: {narration}")
            continue
        try:
            passage = parse_markup_passage(narration, passage_id=pid, doc_id=event_type)
        except MarkupError as exc:
            diagnostics.append(f"{pid}: discarded (markup: {exc})")
            continue
        problems = _check_synthetic(passage, plan)
        if problems:
            diagnostics.append(f"{pid}: discarded ({'; '.join(problems)})")
            continue
        passages.append(passage)
    return passages, diagnostics


def _check_synthetic(p: AnnotatedPassage, plan: GenerationPlan) -> list[str]:
    problems = validate_augmented(p)
    if not p.events:
        problems.append("no event mention")
    for ctype, wanted, label in (
        (ContextType.LOCATION, plan.loc_distractors, "location"),
        (ContextType.TEMPORAL, plan.tmp_distractors, "temporal"),
    ):
        true = sum(1 for m in p.mentions if m.ctype is ctype and not m.distractor)
        fake = sum(1 for m in p.mentions if m.ctype is ctype and m.distractor)
        if true < 1:
            problems.append(f"no true {label} context")
        if fake != wanted:
            problems.append(f"expected {wanted} {label} distractors, found {fake}")
    return problems
