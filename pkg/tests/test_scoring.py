import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sck.core import ContextSet, ContextType, normalize, tokenize
from sck.scoring import (
    PRF,
    PredictionRecord,
    aggregate_runs,
    read_predictions_jsonl,
    report_to_dict,
    score_dataset,
    span_score_event,
    token_score_event,
    write_predictions_jsonl,
)

from helpers_sck import make_passage, simple_gold_passage

L = ContextType.LOCATION
T = ContextType.TEMPORAL


def locs(*items):
    return ContextSet(tuple(items), ())


def times(*items):
    return ContextSet((), tuple(items))


class TestSpanScore:
    def test_normalization_collapses_variants(self):
        assert span_score_event(locs("wuhan china"), locs("Wuhan, China"), L) == PRF(1, 1, 1)

    def test_partial_multiset(self):
        got = span_score_event(locs("uk", "france"), locs("france", "germany"), L)
        assert got == PRF(0.5, 0.5, 0.5)

    def test_abstention_rules(self):
        assert span_score_event(ContextSet(), locs("paris"), L) == PRF(0, 0, 0)
        assert span_score_event(locs("paris"), ContextSet(), L) == PRF(0, 0, 0)
        assert span_score_event(ContextSet(), ContextSet(), L) == PRF(1, 1, 1)

    def test_repeated_mentions_count_multiply(self):
        got = span_score_event(locs("lima", "lima"), locs("lima"), L)
        assert got == PRF(1.0, 0.5, pytest.approx(2 / 3))


class TestTokenScore:
    def test_partial_prediction(self):
        got = token_score_event(
            locs("western and northern europe united kingdom"),
            locs("western and northern europe"),
            L,
        )
        assert got.precision == pytest.approx(1.0)
        assert got.recall == pytest.approx(2 / 3)
        assert got.f1 == pytest.approx(0.8)

    def test_range_endpoints(self):
        got = token_score_event(times("between 2009 and 2014"), times("2009", "2014"), T)
        assert got.precision == pytest.approx(1.0)
        assert got.recall == pytest.approx(0.5)
        assert got.f1 == pytest.approx(2 / 3)

    def test_mutual_abstention(self):
        assert token_score_event(ContextSet(), ContextSet(), T) == PRF(1, 1, 1)

    def test_disjoint_tokens(self):
        got = token_score_event(locs("paris"), locs("rome"), L)
        assert got == PRF(0.0, 0.0, 0.0)


class TestScoringProperties:
    small_set = st.lists(
        st.text(alphabet="abcde ", min_size=1, max_size=8).map(normalize).filter(bool),
        max_size=4,
    )

    @given(small_set, small_set)
    def test_symmetric_abstention(self, g, p):
        span = span_score_event(locs(*g), locs(*p), L)
        token = token_score_event(locs(*g), locs(*p), L)
        if not g and not p:
            assert span == token == PRF(1, 1, 1)
        elif not g or not p:
            assert span == token == PRF(0, 0, 0)

    @given(small_set, small_set, st.randoms())
    def test_permutation_invariance(self, g, p, rng):
        g2, p2 = list(g), list(p)
        rng.shuffle(g2)
        rng.shuffle(p2)
        assert span_score_event(locs(*g), locs(*p), L) == span_score_event(locs(*g2), locs(*p2), L)
        assert token_score_event(locs(*g), locs(*p), L) == token_score_event(
            locs(*g2), locs(*p2), L
        )

    @given(small_set, small_set)
    def test_span_exact_implies_token_perfect(self, g, p):
        if span_score_event(locs(*g), locs(*p), L) == PRF(1, 1, 1):
            assert token_score_event(locs(*g), locs(*p), L) == PRF(1, 1, 1)

    @given(st.data())
    def test_substring_prediction_recall(self, data):
        gold_tokens = data.draw(
            st.lists(st.sampled_from("abcdefghij"), min_size=2, max_size=8)
        )
        start = data.draw(st.integers(0, len(gold_tokens) - 1))
        end = data.draw(st.integers(start + 1, len(gold_tokens)))
        pred = " ".join(gold_tokens[start:end])
        got = token_score_event(locs(" ".join(gold_tokens)), locs(pred), L)
        assert got.precision == pytest.approx(1.0)
        assert got.recall == pytest.approx((end - start) / len(gold_tokens))


def oracle_match_count(gold_items, pred_items):
    """Brute-force multiset intersection by repeated removal."""
    remaining = list(gold_items)
    matched = 0
    for item in pred_items:
        for i, g in enumerate(remaining):
            if g == item:
                del remaining[i]
                matched += 1
                break
    return matched


def oracle_prf(gold_items, pred_items):
    if not gold_items and not pred_items:
        return (1.0, 1.0, 1.0)
    if not gold_items or not pred_items:
        return (0.0, 0.0, 0.0)
    matched = oracle_match_count(gold_items, pred_items)
    precision = matched / len(pred_items)
    recall = matched / len(gold_items)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return (precision, recall, f1)


def oracle_span(gold_spans, pred_spans):
    return oracle_prf([normalize(s) for s in gold_spans], [normalize(s) for s in pred_spans])


def oracle_token(gold_spans, pred_spans):
    gold_tokens = []
    for s in gold_spans:
        gold_tokens.extend(tokenize(s))
    pred_tokens = []
    for s in pred_spans:
        pred_tokens.extend(tokenize(s))
    return oracle_prf(gold_tokens, pred_tokens)


VOCAB = ["alpha", "bravo", "carol", "delta", "echo", "fox", "golf", "hotel", "india", "julia"]


def random_instance(rng):
    def side():
        return [
            " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 3)))
            for _ in range(rng.randint(0, 4))
        ]

    return side(), side()


class TestOracleAgreement:
    def test_scorers_match_bruteforce_oracle(self):
        rng = random.Random(1234)
        for _ in range(300):
            gold_spans, pred_spans = random_instance(rng)
            gold, pred = locs(*gold_spans), locs(*pred_spans)
            got = span_score_event(gold, pred, L)
            assert (got.precision, got.recall, got.f1) == oracle_span(gold_spans, pred_spans)
            got = token_score_event(gold, pred, L)
            assert (got.precision, got.recall, got.f1) == oracle_token(gold_spans, pred_spans)


def two_passage_gold():
    p1 = simple_gold_passage("p1")
    p2 = make_passage(
        "p2",
        "The fair opened in Kyoto.",
        [("e1", "opened")],
        [("m1", "Kyoto", ContextType.LOCATION)],
        [("e1", "m1")],
    )
    return [p1, p2]


class TestScoreDataset:
    def test_identity_predictions_are_perfect(self):
        gold = two_passage_gold()
        preds = [
            PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
            PredictionRecord("p2", "e1", ContextSet(("kyoto",), ())),
        ]
        report = score_dataset(gold, preds)
        for level in (report.span, report.token):
            for ctype in ContextType:
                assert level[ctype] == PRF(1, 1, 1)
        assert report.event_count == 2
        assert report.diagnostics == ()

    def test_macro_average_of_mixed_events(self):
        gold = two_passage_gold()
        preds = [
            PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
            PredictionRecord("p2", "e1", ContextSet(("oslo",), ())),
        ]
        report = score_dataset(gold, preds)
        assert report.span[L].f1 == pytest.approx(0.5)

    def test_all_empty_predictions_score_zero(self):
        gold = two_passage_gold()
        preds = [
            PredictionRecord("p1", "e1", ContextSet()),
            PredictionRecord("p2", "e1", ContextSet()),
        ]
        report = score_dataset(gold, preds)
        assert report.span[L] == PRF(0, 0, 0)
        # p2 has no temporal gold: empty prediction there is a correct abstention
        assert report.span[T].f1 == pytest.approx(0.5)

    def test_missing_prediction_is_empty_with_diagnostic(self):
        gold = two_passage_gold()
        report = score_dataset(gold, [PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",)))])
        assert any("no prediction" in d for d in report.diagnostics)
        assert report.span[L].f1 == pytest.approx(0.5)

    def test_duplicate_prediction_rejected(self):
        gold = two_passage_gold()
        preds = [
            PredictionRecord("p1", "e1", ContextSet()),
            PredictionRecord("p1", "e1", ContextSet()),
        ]
        with pytest.raises(ValueError, match="duplicate"):
            score_dataset(gold, preds)

    def test_unknown_prediction_reported(self):
        gold = two_passage_gold()
        preds = [
            PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
            PredictionRecord("p2", "e1", ContextSet(("kyoto",), ())),
            PredictionRecord("p9", "e9", ContextSet(("mars",), ())),
        ]
        report = score_dataset(gold, preds)
        assert any("unknown event" in d for d in report.diagnostics)

    def test_restrict_to_annotated(self):
        gold = two_passage_gold()  # p2 has no temporal annotation
        preds = [
            PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
            PredictionRecord("p2", "e1", ContextSet(("kyoto",), ())),
        ]
        full = score_dataset(gold, preds)
        restricted = score_dataset(gold, preds, restrict_to_annotated=True)
        assert full.span[T] == PRF(1, 1, 1)  # abstention credited
        assert restricted.span[T] == PRF(1, 1, 1)  # only p1 temporal averaged
        preds[1] = PredictionRecord("p2", "e1", ContextSet(("kyoto",), ("1999",)))
        full = score_dataset(gold, preds)
        restricted = score_dataset(gold, preds, restrict_to_annotated=True)
        assert full.span[T].f1 == pytest.approx(0.5)
        assert restricted.span[T] == PRF(1, 1, 1)


class TestAggregateRuns:
    def test_mean_of_equal_reports_is_identity(self):
        gold = two_passage_gold()
        preds = [
            PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
            PredictionRecord("p2", "e1", ContextSet(("kyoto",), ())),
        ]
        report = score_dataset(gold, preds)
        merged = aggregate_runs([report, report])
        assert merged.span == report.span
        assert merged.token == report.token

    def test_arithmetic_mean(self):
        a = score_dataset(
            two_passage_gold(),
            [
                PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
                PredictionRecord("p2", "e1", ContextSet(("kyoto",), ())),
            ],
        )
        b = score_dataset(
            two_passage_gold(),
            [
                PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",))),
                PredictionRecord("p2", "e1", ContextSet(("oslo",), ())),
            ],
        )
        merged = aggregate_runs([a, b])
        assert merged.span[L].f1 == pytest.approx((a.span[L].f1 + b.span[L].f1) / 2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_runs([])

    def test_mismatched_event_counts_rejected(self):
        a = score_dataset(two_passage_gold(), [])
        b = score_dataset([simple_gold_passage("p1")], [])
        with pytest.raises(ValueError, match="mismatched"):
            aggregate_runs([a, b])


class TestPredictionIo:
    def test_parsed_form_round_trip(self, tmp_path):
        records = [
            PredictionRecord("p1", "e1", ContextSet(("lima",), ("2001",)), True),
            PredictionRecord("p2", "e1", ContextSet(), False),
        ]
        path = tmp_path / "preds.jsonl"
        write_predictions_jsonl(path, records)
        assert read_predictions_jsonl(path) == records

    def test_decoded_form(self, tmp_path):
        path = tmp_path / "decoded.jsonl"
        path.write_text(
            '{"passage_id": "p1", "event_id": "e1", "decoded": "location: lima; time: 2001"}\n'
            '{"passage_id": "p2", "event_id": "e1", "decoded": "gibberish"}\n',
            encoding="utf-8",
        )
        records = read_predictions_jsonl(path)
        assert records[0].predicted == ContextSet(("lima",), ("2001",))
        assert records[0].valid_parse
        assert not records[1].valid_parse

    def test_report_dict_shape(self):
        report = score_dataset(two_passage_gold(), [])
        d = report_to_dict(report)
        assert set(d["span"]) == {"location", "temporal"}
        assert set(d["span"]["location"]) == {"precision", "recall", "f1"}
        assert d["event_count"] == 2
