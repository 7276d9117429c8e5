from __future__ import annotations

import html
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esgclarity.errors import EmptyEvaluation
from esgclarity.labels import CLARITY_ORDER, ClarityLabel
from esgclarity.reporting import (
    ABSTAIN,
    ComparisonEntry,
    DocumentReport,
    MetricsReport,
    ClassMetrics,
    comparison_csv,
    comparison_report,
    compute_metrics,
    error_table,
    render_document_report,
)
from esgclarity.scoring import ClarityCounts, ScoreConfig, language_score

S, A, G = ClarityLabel.SPECIFIC, ClarityLabel.AMBIGUOUS, ClarityLabel.GENERIC


def brute_force_metrics(pairs, classes):
    """Independent oracle: dict-counting implementation, no shared code."""
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    correct = 0
    for gold, pred in pairs:
        if gold == pred:
            tp[gold] += 1
            correct += 1
        else:
            fn[gold] += 1
            if pred in fp:
                fp[pred] += 1
    out = {}
    for c in classes:
        p = tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] else 0.0
        r = tp[c] / (tp[c] + fn[c]) if tp[c] + fn[c] else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        out[c] = (p, r, f1)
    macro_f1 = sum(v[2] for v in out.values()) / len(classes)
    return correct / len(pairs), out, macro_f1


class TestComputeMetrics:
    def test_perfect(self):
        pairs = [(S, S), (A, A), (G, G)] * 3
        rep = compute_metrics(pairs, classes=CLARITY_ORDER)
        assert rep.accuracy == 1.0
        assert rep.macro_f1 == 1.0
        assert rep.n == 9

    def test_worked_six_pair_fixture(self):
        # gold=(S,S,A,A,G,G), pred=(S,A,A,A,G,S); hand-derived values
        pairs = list(zip([S, S, A, A, G, G], [S, A, A, A, G, S]))
        rep = compute_metrics(pairs, classes=CLARITY_ORDER)
        assert rep.accuracy == pytest.approx(4 / 6)
        per = rep.per_class
        assert per["Specific"].precision == pytest.approx(1 / 2)
        assert per["Ambiguous"].precision == pytest.approx(2 / 3)
        assert per["Generic"].precision == pytest.approx(1.0)
        assert per["Specific"].recall == pytest.approx(1 / 2)
        assert per["Ambiguous"].recall == pytest.approx(1.0)
        assert per["Generic"].recall == pytest.approx(1 / 2)
        assert per["Specific"].f1 == pytest.approx(1 / 2)
        assert per["Ambiguous"].f1 == pytest.approx(4 / 5)
        assert per["Generic"].f1 == pytest.approx(2 / 3)
        assert rep.macro_f1 == pytest.approx(0.6556, abs=1e-4)

    def test_never_predicted_class_gets_zero_precision(self):
        pairs = [(G, S), (G, A), (S, S)]
        rep = compute_metrics(pairs, classes=CLARITY_ORDER)
        assert rep.per_class["Generic"].precision == 0.0
        assert rep.per_class["Generic"].f1 == 0.0

    def test_class_absent_from_gold_contributes_zero(self):
        pairs = [(S, S), (A, A)]
        rep = compute_metrics(pairs, classes=CLARITY_ORDER)
        assert rep.per_class["Generic"].recall == 0.0
        assert rep.macro_f1 == pytest.approx(2 / 3)

    def test_empty_raises(self):
        with pytest.raises(EmptyEvaluation):
            compute_metrics([])

    def test_confusion_sums_to_n_with_abstain_column(self):
        pairs = [(S, S), (A, ABSTAIN), (G, G)]
        rep = compute_metrics(pairs, classes=CLARITY_ORDER)
        assert sum(sum(row) for row in rep.confusion) == rep.n == 3
        assert ABSTAIN in rep.confusion_labels
        assert len(rep.confusion) == 3  # rows stay the gold classes

    @given(st.lists(st.tuples(st.sampled_from([S, A, G]), st.sampled_from([S, A, G])),
                    min_size=1, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force(self, pairs):
        rep = compute_metrics(pairs, classes=CLARITY_ORDER)
        acc, per, macro_f1 = brute_force_metrics(pairs, list(CLARITY_ORDER))
        assert rep.accuracy == pytest.approx(acc)
        assert rep.macro_f1 == pytest.approx(macro_f1)
        for c in CLARITY_ORDER:
            p, r, f1 = per[c]
            assert rep.per_class[c.value].precision == pytest.approx(p)
            assert rep.per_class[c.value].recall == pytest.approx(r)
            assert rep.per_class[c.value].f1 == pytest.approx(f1)

    @given(st.lists(st.tuples(st.sampled_from([S, A, G]), st.sampled_from([S, A, G])),
                    min_size=1, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_macro_f1_invariant_under_class_permutation(self, pairs):
        base = compute_metrics(pairs, classes=(S, A, G)).macro_f1
        for perm in [(A, G, S), (G, S, A), (G, A, S)]:
            assert compute_metrics(pairs, classes=perm).macro_f1 == pytest.approx(base)


class TestErrorTable:
    def test_perfect_predictions_empty(self):
        assert error_table([("x", S, S), ("y", G, G)]) == []

    def test_exactly_the_mismatches_in_order(self):
        items = [
            ("s1", S, S), ("s2", S, A), ("s3", A, A),
            ("s4", A, A), ("s5", G, G), ("s6", G, S),
        ]
        cases = error_table(items)
        assert [(c.text, c.gold, c.predicted) for c in cases] == [
            ("s2", S, A), ("s6", G, S),
        ]
        assert all(c.gold != c.predicted for c in cases)


def _report(spans):
    counts = ClarityCounts(doc_id="doc1", x_s=1, x_a=1, x_g=1)
    score = language_score(counts, ScoreConfig())
    return DocumentReport(doc_id="doc1", spans=tuple(spans), score=score,
                          rank=1, rating=5)


class TestRenderDocumentReport:
    def test_one_span_per_class(self):
        spans = [("Alpha.", S), ("Beta.", A), ("Gamma.", G)]
        out = render_document_report(_report(spans), "html")
        assert out.count("<span") == 3
        for cls in ("specific", "ambiguous", "generic"):
            assert f'<span class="{cls}">' in out
        assert "score=" in out and "rating=5" in out

    def test_non_esg_not_wrapped(self):
        spans = [("Plain fact.", None), ("Rule.", S)]
        out = render_document_report(_report(spans), "html")
        assert out.count("<span") == 1
        assert "Plain fact." in out

    def test_zero_esg_document(self):
        counts = ClarityCounts(doc_id="empty", x_s=0, x_a=0, x_g=0)
        report = DocumentReport(
            doc_id="empty", spans=(("Nothing relevant.", None),),
            score=language_score(counts, ScoreConfig()),
        )
        out = render_document_report(report, "html")
        assert "<span" not in out
        assert "score=0.0000" in out

    def test_strip_tags_round_trip(self):
        spans = [("A <b>bold</b> claim.", S), ("Plain.", None), ("Generic & co.", G)]
        out = render_document_report(_report(spans), "html")
        main = re.search(r"<main>(.*)</main>", out, re.DOTALL).group(1)
        stripped = html.unescape(re.sub(r"<[^>]+>", "", main))
        assert stripped == " ".join(t for t, _ in spans)

    def test_markdown_format(self):
        out = render_document_report(_report([("Alpha.", S)]), "markdown")
        assert "`Specific` Alpha." in out

    def test_deterministic(self):
        spans = [("Alpha.", S), ("Beta.", A)]
        assert render_document_report(_report(spans), "html") == render_document_report(
            _report(spans), "html"
        )


def _metrics(acc, p, r, f1):
    return MetricsReport(
        classes=tuple(c.value for c in CLARITY_ORDER),
        accuracy=acc, macro_precision=p, macro_recall=r, macro_f1=f1,
        per_class={c.value: ClassMetrics(p, r, f1, 10) for c in CLARITY_ORDER},
        confusion=((10, 0, 0), (0, 10, 0), (0, 0, 10)),
        confusion_labels=tuple(c.value for c in CLARITY_ORDER),
        n=30,
    )


class TestComparisonReport:
    def test_delta_row_between_families(self):
        # published-values check: 0.85 fine-tuned vs 0.53 zero-shot -> +0.32
        entries = [
            ComparisonEntry("MiniLM-v2", "finetuned", _metrics(0.85, 0.87, 0.85, 0.85)),
            ComparisonEntry("GPT-3.5 Turbo", "zeroshot", _metrics(0.57, 0.58, 0.56, 0.53)),
        ]
        out = comparison_report(entries)
        delta_line = [l for l in out.splitlines() if l.startswith("| delta")][0]
        assert "+0.3200" in delta_line  # F1 column
        csv_out = comparison_csv(entries)
        assert csv_out.splitlines()[0] == "method,accuracy,precision,recall,f1"
        assert csv_out.splitlines()[-1].endswith("+0.320000")

    def test_single_report_no_delta(self):
        out = comparison_report(
            [ComparisonEntry("only", "finetuned", _metrics(0.9, 0.9, 0.9, 0.9))]
        )
        assert "delta" not in out
        assert out.count("\n") == 3  # header, separator, one row

    def test_column_order_fixed(self):
        out = comparison_report(
            [ComparisonEntry("m", "finetuned", _metrics(0.1, 0.2, 0.3, 0.4))]
        )
        assert out.splitlines()[0] == "| Method | Accuracy | Precision | Recall | F1 |"
        assert "| 0.1000 | 0.2000 | 0.3000 | 0.4000 |" in out.splitlines()[2]

    def test_best_per_family_selected(self):
        entries = [
            ComparisonEntry("weak-ft", "finetuned", _metrics(0.7, 0.7, 0.7, 0.7)),
            ComparisonEntry("best-ft", "finetuned", _metrics(0.9, 0.9, 0.9, 0.9)),
            ComparisonEntry("zs", "zeroshot", _metrics(0.5, 0.5, 0.5, 0.5)),
        ]
        out = comparison_report(entries)
        assert "delta (best-ft - zs)" in out
