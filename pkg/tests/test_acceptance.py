"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -rA -s` to see every line. The
released-dataset check is data-dependent and skips with a notice when the
export is not available.
"""

import os
import random
import time
from pathlib import Path

import pytest

from sck.analysis import AgreementItem, ErrorCategory, classify_error, cohens_kappa, error_report
from sck.baselines import SrlArgument, SrlFrame, score_srl_baseline
from sck.core import ContextSet, ContextType, normalize
from sck.ingest import corpus_stats, parse_labelstudio_export, parse_markup_passage, render_markup
from sck.promptgen import build_target_sequence, parse_model_output
from sck.scoring import PRF, PredictionRecord, span_score_event, token_score_event

from helpers_sck import make_passage
from test_scoring import oracle_span, oracle_token

L = ContextType.LOCATION
T = ContextType.TEMPORAL


def check(name, condition):
    print(f"{'PASS' if condition else 'FAIL'}: {name}")
    assert condition, name


VOCAB = ["alpha", "bravo", "carol", "delta", "echo", "fox", "golf", "hotel", "india", "julia"]


def test_scorer_oracle_equivalence():
    rng = random.Random(32001)

    def side():
        return [
            " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 3)))
            for _ in range(rng.randint(0, 4))
        ]

    started = time.perf_counter()
    agree = True
    for _ in range(1000):
        gold_spans, pred_spans = side(), side()
        gold = ContextSet(tuple(gold_spans), ())
        pred = ContextSet(tuple(pred_spans), ())
        span = span_score_event(gold, pred, L)
        token = token_score_event(gold, pred, L)
        if (span.precision, span.recall, span.f1) != oracle_span(gold_spans, pred_spans):
            agree = False
            break
        if (token.precision, token.recall, token.f1) != oracle_token(gold_spans, pred_spans):
            agree = False
            break
    elapsed = time.perf_counter() - started
    check(
        "scorer oracle equivalence (1000 instances, exact)",
        agree and elapsed < 5.0,
    )


def test_paper_worked_examples():
    partial = token_score_event(
        ContextSet(("western and northern europe united kingdom",), ()),
        ContextSet(("western and northern europe",), ()),
        L,
    )
    endpoints = token_score_event(
        ContextSet((), ("between 2009 and 2014",)),
        ContextSet((), ("2009", "2014")),
        T,
    )
    ok = (
        abs(partial.precision - 1.0) < 1e-9
        and abs(partial.recall - 2 / 3) < 1e-9
        and abs(partial.f1 - 0.8) < 1e-9
        and abs(endpoints.precision - 1.0) < 1e-9
        and abs(endpoints.recall - 0.5) < 1e-9
        and abs(endpoints.f1 - 2 / 3) < 1e-9
    )
    check("token-level worked examples (partial 1.0/0.6667/0.8, range 1.0/0.5/0.6667)", ok)


def test_target_sequence_round_trip():
    rng = random.Random(32002)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789 "

    def item():
        while True:
            raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 20)))
            out = normalize(raw)
            if out:
                return out

    ok = True
    for _ in range(1000):
        ctx = ContextSet(
            tuple(item() for _ in range(rng.randint(0, 4))),
            tuple(item() for _ in range(rng.randint(0, 4))),
        )
        parsed, valid = parse_model_output(build_target_sequence(ctx))
        if not valid or parsed != ctx:
            ok = False
            break
    check("target sequence round trip (1000 random context sets, exact)", ok)


def _planted_passage(rng):
    names = ["the Summit", "the Flood", "the Expo", "the Outbreak", "the Festival"]
    cities = ["Lima", "Porto", "Kyoto", "Oslo", "Cairo"]
    years = ["1964", "1987", "2001", "2014", "2020"]
    name = rng.choice(names)
    city = rng.choice(cities)
    year = rng.choice(years)
    rementions = rng.randint(0, 2)
    loc_distractors = rng.randint(0, 2)
    tmp_distractors = rng.randint(0, 2)
    parts = [
        f"<evt>{name}</evt> took place in <loc>{city}</loc> during <tmp>{year}</tmp>."
    ]
    for _ in range(rementions):
        parts.append(" Witnesses remember <evt>it</evt> well.")
    for _ in range(loc_distractors):
        other = rng.choice([c for c in cities if c != city])
        parts.append(f" Some wrongly say <nloc>{other}</nloc> hosted it.")
    for _ in range(tmp_distractors):
        other = rng.choice([y for y in years if y != year])
        parts.append(f" Others date it to <ntmp>{other}</ntmp>.")
    text = "".join(parts)
    events = 1 + rementions
    return text, events, loc_distractors, tmp_distractors


def test_markup_pipeline():
    rng = random.Random(32003)
    ok = True
    for _ in range(100):
        text, events, loc_distractors, tmp_distractors = _planted_passage(rng)
        passage = parse_markup_passage(text)
        mentions = passage.mentions_by_id()
        distractors = [m for m in passage.mentions if m.distractor]
        planted = events * 2  # each event relates to one location and one time
        if len(passage.events) != events or len(passage.relations) != planted:
            ok = False
            break
        if any(mentions[r.mention_id].distractor for r in passage.relations):
            ok = False
            break
        if len(distractors) != loc_distractors + tmp_distractors:
            ok = False
            break
        per_event = {e.id: {r.ctype for r in passage.relations if r.event_id == e.id}
                     for e in passage.events}
        if any(kinds != {L, T} for kinds in per_event.values()):
            ok = False
            break
        if render_markup(passage) != text:
            ok = False
            break
    check("markup pipeline (100 planted passages, exact relations, byte round trip)", ok)


def test_error_taxonomy():
    cases = {
        ErrorCategory.SPURIOUS: (ContextSet(), ContextSet(("2020",), ())),
        ErrorCategory.MISSING: (ContextSet(("lima",), ()), ContextSet()),
        ErrorCategory.EXACT_AFTER_NORM: (
            ContextSet(("Wuhan, China",), ()),
            ContextSet(("wuhan china",), ()),
        ),
        ErrorCategory.PARTIAL: (
            ContextSet(("western and northern europe united kingdom",), ()),
            ContextSet(("western and northern europe",), ()),
        ),
        ErrorCategory.OVER: (
            ContextSet(("paris",), ()),
            ContextSet(("paris france",), ()),
        ),
        ErrorCategory.OVERLAP: (
            ContextSet(("california indiana new york",), ()),
            ContextSet(("california (ca) indiana (in) new york (ny)",), ()),
        ),
        ErrorCategory.DISJOINT: (ContextSet(("paris",), ()), ContextSet(("rome",), ())),
    }
    rules_fire_once = all(
        classify_error(gold, pred, L) is category
        for category, (gold, pred) in cases.items()
    )

    passages = []
    preds = []
    for i, (category, (gold, pred)) in enumerate(cases.items()):
        pid = f"fixture-{i}"
        if gold.locations:
            text = f"Event happened in {gold.locations[0]}."
            passages.append(
                make_passage(pid, text, [("e", "happened")],
                             [("m", gold.locations[0], L)], [("e", "m")])
            )
        else:
            passages.append(
                make_passage(pid, "Event happened.", [("e", "happened")], [], [])
            )
        preds.append(PredictionRecord(pid, "e", pred))
    report = error_report(passages, preds)
    location_counts = {
        category: report.errors[(category, L)]
        for category in ErrorCategory
        if category is not ErrorCategory.EXACT_AFTER_NORM
    }
    report_ok = (
        all(count == 1 for count in location_counts.values())
        and report.exact[L] == 1
    )

    section4_pairs_ok = (
        classify_error(
            ContextSet(("western and northern europe united kingdom",), ()),
            ContextSet(("western and northern europe",), ()),
            L,
        )
        is ErrorCategory.PARTIAL
        and classify_error(
            ContextSet(("california indiana new york",), ()),
            ContextSet(("california (ca) indiana (in) new york (ny)",), ()),
            L,
        )
        is ErrorCategory.OVERLAP
    )
    check(
        "error taxonomy (7-case fixture, one hit per rule; worked pairs Partial/Overlap)",
        rules_fire_once and report_ok and section4_pairs_ok,
    )


def test_cohens_kappa_cases():
    perfect = [AgreementItem(str(i), "yes", "yes") for i in range(10)]
    # 8/10 agreement with both raters at 5/5 marginals: p_o=0.8, p_e=0.5.
    a = ["y", "y", "y", "y", "y", "n", "n", "n", "n", "n"]
    b = ["y", "y", "y", "y", "n", "y", "n", "n", "n", "n"]
    mostly = [AgreementItem(str(i), a[i], b[i]) for i in range(10)]
    disagree = [
        AgreementItem(str(i), x, y)
        for i, (x, y) in enumerate(zip(["y"] * 5 + ["n"] * 5, ["n"] * 5 + ["y"] * 5))
    ]
    ok = (
        abs(cohens_kappa(perfect) - 1.0) < 1e-12
        and abs(cohens_kappa(mostly) - 0.6) < 1e-12
        and abs(cohens_kappa(disagree) - (-1.0)) < 1e-12
    )
    check("cohen's kappa hand-computed cases (1.0, 0.6, -1.0; 1e-12)", ok)


RELEASED_EXPORT_ENV = "SCK_RELEASED_EXPORT"
RELEASED_EXPORT_DEFAULTS = [
    Path("data/released_export.json"),
    Path("data/scenario_context_export.json"),
]


def _released_export_path():
    env = os.environ.get(RELEASED_EXPORT_ENV)
    if env:
        return Path(env)
    for candidate in RELEASED_EXPORT_DEFAULTS:
        if candidate.exists():
            return candidate
    return None


def test_released_dataset_counts():
    path = _released_export_path()
    if path is None or not path.exists():
        print(
            "SKIP: released dataset counts (set "
            f"{RELEASED_EXPORT_ENV} to the annotation export to enable)"
        )
        pytest.skip("released dataset export not available")
    passages, _ = parse_labelstudio_export(path.read_bytes())
    stats = corpus_stats(passages)
    ok = (
        stats.passage_count == 383
        and stats.relation_count == 1382
        and stats.location_relations == 833
        and stats.temporal_relations == 549
        and abs(stats.intersentential_fraction - 0.18) <= 0.02
    )
    check("released dataset counts (383/1382, 833/549, intersentential 0.18 +- 0.02)", ok)


def _srl_fixture():
    """Ten passages with hand-built frames and hand-computed micro PRF.

    Location: TP 4, FP 2, FN 4 -> P 2/3, R 1/2, F1 4/7.
    Temporal: TP 3, FP 2, FN 0 -> P 3/5, R 1,   F1 3/4.
    """

    def fr(predicate, *args):
        return SrlFrame(predicate, tuple(SrlArgument(l, t) for l, t in args), 0)

    passages = []
    parses = {}

    def add(pid, text, event, rels, frames):
        mentions = [(f"m{i}", needle, ctype) for i, (needle, ctype) in enumerate(rels)]
        passages.append(
            make_passage(pid, text, [("e", event)], mentions,
                         [("e", m[0]) for m in mentions])
        )
        parses[pid] = frames

    add("s1", "The outbreak began in Lima.", "The outbreak", [("Lima", L)],
        [fr("began", ("ARG1", "The outbreak"), ("ARGM-LOC", "in Lima"))])
    add("s2", "The epidemic spread in 2002.", "The epidemic", [("2002", T)],
        [fr("spread", ("ARG1", "The epidemic"), ("ARGM-TMP", "in 2002"))])
    add("s3", "The flood hit Jakarta.", "The flood", [("Jakarta", L)], [])
    add("s4", "The summit met in Zurich.", "The summit", [("Zurich", L)],
        [fr("met", ("ARG1", "The summit"), ("ARGM-LOC", "in Geneva"))])
    add("s5", "The election happened in Cairo.", "The election", [("Cairo", L)],
        [fr("happened", ("ARG0", "The election"), ("ARGM-TMP", "in 1999"))])
    add("s6", "The negotiation continued in Oslo.", "The negotiation", [("Oslo", L)],
        [fr("held", ("ARG1", "the ceremony"), ("ARGM-LOC", "in Oslo"))])
    add("s7", "Heavy rains intensified during March.", "rains intensified", [("March", T)],
        [fr("intensified", ("ARG1", "rains"), ("ARGM-TMP", "during March"))])
    add("s8", "The bridge collapsed suddenly near Miami.", "collapsed suddenly", [("Miami", L)],
        [fr("collapsed", ("ARGM-MNR", "suddenly"), ("ARGM-LOC", "near Miami"))])
    add("s9", "The games opened in Tokyo in 1964.", "The games",
        [("Tokyo", L), ("1964", T)],
        [fr("opened", ("ARG1", "The games"), ("ARGM-LOC", "in Tokyo"), ("ARGM-TMP", "in 1964"))])
    add("s10", "The festival took place in Berlin.", "The festival", [("Berlin", L)],
        [
            fr("took", ("ARG0", "The festival"), ("ARGM-LOC", "in Berlin")),
            fr("happened", ("ARG0", "The festival"), ("ARGM-LOC", "in Munich"),
               ("ARGM-TMP", "last year")),
        ])
    return passages, parses


def test_srl_baseline_determinism():
    passages, parses = _srl_fixture()
    result = score_srl_baseline(passages, parses)
    expected_location = PRF(4 / 6, 4 / 8, 2 * (4 / 6) * (4 / 8) / (4 / 6 + 4 / 8))
    expected_temporal = PRF(3 / 5, 3 / 3, 2 * (3 / 5) * 1.0 / (3 / 5 + 1.0))
    ok = result[L] == expected_location and result[T] == expected_temporal
    check("SRL baseline determinism (10-passage fixture, hand-computed PRF)", ok)
