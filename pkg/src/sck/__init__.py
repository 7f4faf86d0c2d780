"""Toolkit for scenario-context extraction data: the location and time
relevant to a specific event mentioned in text.

Covers dataset construction from annotation exports, LLM-based augmentation,
prompt/target serialization, span- and token-level scoring, baselines, and
agreement statistics.
"""

from .core import (
    AnnotatedPassage,
    ContextMention,
    ContextSet,
    ContextType,
    EventAnchor,
    Provenance,
    ScenarioRelation,
    TextSpan,
    gold_contexts,
    normalize,
    read_passages_jsonl,
    sentence_index,
    tokenize,
    write_passages_jsonl,
)
from .scoring import (
    PRF,
    PredictionRecord,
    ScoreReport,
    aggregate_runs,
    score_dataset,
    span_score_event,
    token_score_event,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedPassage",
    "ContextMention",
    "ContextSet",
    "ContextType",
    "EventAnchor",
    "PRF",
    "PredictionRecord",
    "Provenance",
    "ScenarioRelation",
    "ScoreReport",
    "TextSpan",
    "aggregate_runs",
    "gold_contexts",
    "normalize",
    "read_passages_jsonl",
    "score_dataset",
    "sentence_index",
    "span_score_event",
    "token_score_event",
    "tokenize",
    "write_passages_jsonl",
    "__version__",
]
