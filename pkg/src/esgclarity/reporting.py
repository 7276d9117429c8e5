"""Shared evaluation metrics, error listings, and report rendering.

One metrics code path serves every classifier family (relevance,
fine-tuned clarity, zero-shot) so cross-method comparisons are
apples-to-apples.
"""

from __future__ import annotations

import enum
import html as _html
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyEvaluation
from .labels import CLARITY_ORDER, ClarityLabel
from .scoring import FundScore

#: Prediction token for zero-shot responses with no parseable label.
ABSTAIN = "Abstain"


def _name(label: object) -> str:
    return label.value if isinstance(label, enum.Enum) else str(label)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    classes: tuple[str, ...]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: dict[str, ClassMetrics]
    confusion: tuple[tuple[int, ...], ...]  # rows = gold, cols = confusion_labels
    confusion_labels: tuple[str, ...]  # classes plus any prediction-only labels
    n: int

    def as_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                k: {"precision": v.precision, "recall": v.recall, "f1": v.f1, "support": v.support}
                for k, v in self.per_class.items()
            },
            "confusion": [list(row) for row in self.confusion],
            "confusion_labels": list(self.confusion_labels),
            "n": self.n,
        }


def compute_metrics(
    pairs: Sequence[tuple[object, object]],
    classes: Sequence[object] | None = None,
) -> MetricsReport:
    """Accuracy plus per-class and macro precision/recall/F1.

    Zero-denominator conventions: precision and recall are 0 when their
    denominator is 0, F1 is 0 when P+R is 0. Macro values are unweighted
    means over the fixed class set. Predictions outside the class set
    (e.g. zero-shot abstentions) count against accuracy and recall but
    contribute no true/false positives; they appear as extra confusion
    columns so entries still sum to n.
    """
    if not pairs:
        raise EmptyEvaluation("no (gold, predicted) pairs to evaluate")
    golds = [_name(g) for g, _ in pairs]
    preds = [_name(p) for _, p in pairs]

    if classes is None:
        seen = set(golds)
        if seen <= {c.value for c in CLARITY_ORDER}:
            cls = [c.value for c in CLARITY_ORDER if c.value in seen]
        else:
            cls = sorted(seen)
    else:
        cls = [_name(c) for c in classes]

    unknown_gold = set(golds) - set(cls)
    if unknown_gold:
        raise ValueError(f"gold labels outside the class set: {sorted(unknown_gold)}")

    extra = sorted(set(preds) - set(cls))
    col_labels = list(cls) + extra
    col_index = {c: i for i, c in enumerate(col_labels)}
    row_index = {c: i for i, c in enumerate(cls)}

    confusion = [[0] * len(col_labels) for _ in cls]
    for g, p in zip(golds, preds):
        confusion[row_index[g]][col_index[p]] += 1

    per_class: dict[str, ClassMetrics] = {}
    for c in cls:
        r, k = row_index[c], col_index[c]
        tp = confusion[r][k]
        fp = sum(confusion[i][k] for i in range(len(cls)) if i != r)
        fn = sum(confusion[r][j] for j in range(len(col_labels)) if j != k)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = ClassMetrics(precision, recall, f1, tp + fn)

    n = len(pairs)
    correct = sum(confusion[row_index[c]][col_index[c]] for c in cls)
    k = len(cls)
    return MetricsReport(
        classes=tuple(cls),
        accuracy=correct / n,
        macro_precision=sum(m.precision for m in per_class.values()) / k,
        macro_recall=sum(m.recall for m in per_class.values()) / k,
        macro_f1=sum(m.f1 for m in per_class.values()) / k,
        per_class=per_class,
        confusion=tuple(tuple(row) for row in confusion),
        confusion_labels=tuple(col_labels),
        n=n,
    )


# ---------------------------------------------------------------------------
# error analysis


@dataclass(frozen=True)
class ErrorCase:
    text: str
    gold: ClarityLabel
    predicted: ClarityLabel


def error_table(
    items: Sequence[tuple[str, ClarityLabel, ClarityLabel]]
) -> list[ErrorCase]:
    """All and only the misclassified items, in input (gold-set) order."""
    return [
        ErrorCase(text=t, gold=g, predicted=p) for t, g, p in items if g != p
    ]


# ---------------------------------------------------------------------------
# color-coded document report


@dataclass(frozen=True)
class DocumentReport:
    doc_id: str
    #: (sentence text, clarity label) in document order; None = non-ESG.
    spans: tuple[tuple[str, ClarityLabel | None], ...]
    score: FundScore
    rank: int | None = None
    rating: int | None = None

    def as_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "spans": [
                {"text": t, "label": lab.value if lab else "NonESG"}
                for t, lab in self.spans
            ],
            "score": {
                "ratio": self.score.ratio,
                "score": self.score.score,
                "x_s": self.score.counts.x_s,
                "x_a": self.score.counts.x_a,
                "x_g": self.score.counts.x_g,
            },
            "rank": self.rank,
            "rating": self.rating,
        }


_CSS = (
    ".specific{color:#0a7d32}"
    ".ambiguous{color:#c0392b}"
    ".generic{color:#000}"
)
_SPAN_CLASS = {
    ClarityLabel.SPECIFIC: "specific",
    ClarityLabel.AMBIGUOUS: "ambiguous",
    ClarityLabel.GENERIC: "generic",
}


def render_document_report(report: DocumentReport, fmt: str = "html") -> str:
    """Render the per-document report; ESG sentences are wrapped (HTML) or
    tagged (markdown) by clarity class, non-ESG sentences left plain.

    Stripping tags from the HTML <main> region reproduces the
    concatenated sentence text.
    """
    s = report.score
    header = (
        f"score={s.score:.4f} ratio={s.ratio:.4f} "
        f"X_S={s.counts.x_s} X_A={s.counts.x_a} X_G={s.counts.x_g}"
    )
    if report.rank is not None:
        header += f" rank={report.rank}"
    if report.rating is not None:
        header += f" rating={report.rating}"

    if fmt == "html":
        parts = []
        for text, label in report.spans:
            esc = _html.escape(text)
            if label is None:
                parts.append(esc)
            else:
                parts.append(f'<span class="{_SPAN_CLASS[label]}">{esc}</span>')
        body = " ".join(parts)
        return (
            "<!doctype html>\n<html><head><meta charset=\"utf-8\">"
            f"<title>{_html.escape(report.doc_id)}</title>"
            f"<style>{_CSS}</style></head>\n<body>\n"
            f"<header><h1>{_html.escape(report.doc_id)}</h1>"
            f'<p class="score-block">{header}</p></header>\n'
            f"<main>{body}</main>\n</body></html>\n"
        )
    if fmt == "markdown":
        lines = [f"# {report.doc_id}", "", f"**{header}**", ""]
        for text, label in report.spans:
            tag = label.value if label else "NonESG"
            lines.append(f"- `{tag}` {text}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# method comparison (fine-tuned vs zero-shot)

_COLUMNS = ("Accuracy", "Precision", "Recall", "F1")


def _metric_row(r: MetricsReport) -> tuple[float, float, float, float]:
    return (r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1)


@dataclass(frozen=True)
class ComparisonEntry:
    name: str
    family: str  # "finetuned" | "zeroshot"
    report: MetricsReport


def comparison_report(entries: Sequence[ComparisonEntry]) -> str:
    """Markdown table, one row per method, plus a delta row between the
    best fine-tuned and best zero-shot entries (by macro F1)."""
    lines = ["| Method | " + " | ".join(_COLUMNS) + " |",
             "|---|---|---|---|---|"]
    for e in entries:
        vals = _metric_row(e.report)
        lines.append(
            f"| {e.name} | " + " | ".join(f"{v:.4f}" for v in vals) + " |"
        )
    delta = _delta_row(entries)
    if delta is not None:
        name, vals = delta
        lines.append(
            f"| {name} | " + " | ".join(f"{v:+.4f}" for v in vals) + " |"
        )
    return "\n".join(lines) + "\n"


def comparison_csv(entries: Sequence[ComparisonEntry]) -> str:
    rows = ["method," + ",".join(c.lower() for c in _COLUMNS)]
    for e in entries:
        rows.append(e.name + "," + ",".join(f"{v:.6f}" for v in _metric_row(e.report)))
    delta = _delta_row(entries)
    if delta is not None:
        name, vals = delta
        rows.append(name + "," + ",".join(f"{v:+.6f}" for v in vals))
    return "\n".join(rows) + "\n"


def _delta_row(
    entries: Sequence[ComparisonEntry],
) -> tuple[str, tuple[float, ...]] | None:
    fine = [e for e in entries if e.family == "finetuned"]
    zero = [e for e in entries if e.family == "zeroshot"]
    if not fine or not zero:
        return None
    best_f = max(fine, key=lambda e: e.report.macro_f1)
    best_z = max(zero, key=lambda e: e.report.macro_f1)
    vals = tuple(
        f - z for f, z in zip(_metric_row(best_f.report), _metric_row(best_z.report))
    )
    return f"delta ({best_f.name} - {best_z.name})", vals
