"""Human-in-the-loop annotation: store, agreement, gold export, splits.

The store is append-only: corrections are new records in a later round
and the latest round wins at export. Everything downstream (agreement
statistics, gold dataset, stratified splits) is recomputable from the
journal alone.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import (
    DuplicateAnnotation,
    InsufficientOverlap,
    LabelTooSmall,
    NoUnresolvedSentences,
    NTooLarge,
    UnknownSentence,
    UntrainedModel,
)
from .ingest import SentenceRecord
from .labels import (
    TRAINABLE_LABELS,
    AnnotationLabel,
    ClarityLabel,
    clarity_from_annotation,
)


@dataclass(frozen=True)
class AnnotationRecord:
    sentence_id: str
    annotator_id: str
    label: AnnotationLabel
    round: int
    timestamp: float = 0.0

    def record_id(self) -> str:
        return f"{self.sentence_id}@{self.annotator_id}@{self.round}"

    def as_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "annotator_id": self.annotator_id,
            "label": self.label.value,
            "round": self.round,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class WeakLabelProposal:
    sentence_id: str
    proposed: ClarityLabel
    confidence: float
    model_version: str


class AnnotationStore:
    """Append-only journal of annotation records over a fixed corpus.

    Single-writer contract: inserts serialize through a lock, and
    duplicate detection is atomic with insertion. Reads are safe from
    any thread.
    """

    def __init__(self, corpus: Sequence[SentenceRecord], journal_path: str | Path | None = None):
        self._sentences = {s.sentence_id: s for s in corpus}
        self._records: list[AnnotationRecord] = []
        self._keys: set[tuple[str, str, int]] = set()
        self._lock = threading.Lock()
        self._journal_path = Path(journal_path) if journal_path else None
        if self._journal_path and self._journal_path.exists():
            for line in self._journal_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._ingest(_record_from_dict(json.loads(line)), persist=False)

    def _ingest(self, record: AnnotationRecord, persist: bool) -> None:
        key = (record.sentence_id, record.annotator_id, record.round)
        if key in self._keys:
            raise DuplicateAnnotation(
                f"{record.sentence_id} already annotated by {record.annotator_id} "
                f"in round {record.round}"
            )
        self._keys.add(key)
        self._records.append(record)
        if persist and self._journal_path:
            with self._journal_path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(record.as_dict()) + "\n")

    def record(self, record: AnnotationRecord) -> AnnotationRecord:
        if record.sentence_id not in self._sentences:
            raise UnknownSentence(record.sentence_id)
        if record.round < 0:
            raise ValueError("round must be >= 0")
        if record.timestamp == 0.0:
            record = AnnotationRecord(
                record.sentence_id, record.annotator_id, record.label,
                record.round, time.time(),
            )
        with self._lock:
            self._ingest(record, persist=True)
        return record

    # -- read side ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[AnnotationRecord]:
        return list(self._records)

    def sentences(self) -> list[SentenceRecord]:
        return list(self._sentences.values())

    def sentence(self, sentence_id: str) -> SentenceRecord:
        try:
            return self._sentences[sentence_id]
        except KeyError:
            raise UnknownSentence(sentence_id) from None

    def max_round(self) -> int:
        return max((r.round for r in self._records), default=-1)

    def latest_by_annotator(self) -> dict[str, dict[str, AnnotationRecord]]:
        """sentence_id -> annotator_id -> that annotator's latest record."""
        latest: dict[str, dict[str, AnnotationRecord]] = {}
        for r in self._records:
            per = latest.setdefault(r.sentence_id, {})
            cur = per.get(r.annotator_id)
            if cur is None or r.round > cur.round:
                per[r.annotator_id] = r
        return latest

    def resolved_labels(self) -> list[tuple[SentenceRecord, ClarityLabel]]:
        """Sentences whose latest annotations unanimously give a
        trainable label; the loop retrains on these."""
        out = []
        for sid, per in sorted(self.latest_by_annotator().items()):
            labels = {r.label for r in per.values()}
            if len(labels) == 1:
                (label,) = labels
                if label in TRAINABLE_LABELS:
                    out.append((self._sentences[sid], clarity_from_annotation(label)))
        return out

    def unresolved_sentences(self) -> list[SentenceRecord]:
        annotated = {r.sentence_id for r in self._records}
        return [s for sid, s in sorted(self._sentences.items()) if sid not in annotated]

    def write_snapshot(self, path: str | Path) -> Path:
        by_label: dict[str, int] = {}
        for per in self.latest_by_annotator().values():
            for r in per.values():
                by_label[r.label.value] = by_label.get(r.label.value, 0) + 1
        payload = {
            "record_count": len(self._records),
            "max_round": self.max_round(),
            "annotated_sentences": len({r.sentence_id for r in self._records}),
            "corpus_size": len(self._sentences),
            "latest_label_distribution": by_label,
        }
        p = Path(path)
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


def _record_from_dict(obj: dict) -> AnnotationRecord:
    return AnnotationRecord(
        sentence_id=obj["sentence_id"],
        annotator_id=obj["annotator_id"],
        label=AnnotationLabel(obj["label"]),
        round=int(obj["round"]),
        timestamp=float(obj.get("timestamp", 0.0)),
    )


# ---------------------------------------------------------------------------
# seed sampling and weak-label proposals


def select_seed_batch(
    sentences: Sequence[SentenceRecord], n: int = 20, seed: int = 0
) -> list[str]:
    """Uniform sample without replacement of sentence ids."""
    if n > len(sentences):
        raise NTooLarge(f"requested {n} of {len(sentences)} sentences")
    rng = random.Random(seed)
    return [s.sentence_id for s in rng.sample(list(sentences), n)]


def propose_weak_labels(model, unlabeled: Sequence[SentenceRecord]) -> list[WeakLabelProposal]:
    """One proposal per sentence, least-confident first for review."""
    if model is None:
        raise UntrainedModel("no clarity model available for proposals")
    proposals = []
    for s in unlabeled:
        label, probs = model.predict(s.text)
        proposals.append(
            WeakLabelProposal(
                sentence_id=s.sentence_id,
                proposed=label,
                confidence=max(probs),
                model_version=getattr(model, "version", "unversioned"),
            )
        )
    return sorted(proposals, key=lambda p: (p.confidence, p.sentence_id))


# ---------------------------------------------------------------------------
# inter-annotator agreement


@dataclass(frozen=True)
class AgreementReport:
    raw_agreement: float
    kappa: dict[tuple[str, str], float]
    shared_counts: dict[tuple[str, str], int] = field(default_factory=dict)


def cohen_kappa(a: Sequence[str], b: Sequence[str]) -> float:
    """Chance-corrected agreement of two aligned label sequences.

    p_e comes from each rater's marginal label distribution; when
    chance agreement is total (p_e = 1, which forces identical constant
    labels) kappa is defined as 1.0.
    """
    if len(a) != len(b) or not a:
        raise ValueError("need two aligned non-empty label sequences")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    labels = set(a) | set(b)
    p_e = sum((list(a).count(l) / n) * (list(b).count(l) / n) for l in labels)
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def compute_agreement(records: Sequence[AnnotationRecord]) -> AgreementReport:
    """Raw agreement plus pairwise Cohen's kappa, latest round winning
    per annotator."""
    latest: dict[str, dict[str, AnnotationRecord]] = {}
    for r in records:
        per = latest.setdefault(r.sentence_id, {})
        cur = per.get(r.annotator_id)
        if cur is None or r.round > cur.round:
            per[r.annotator_id] = r

    multi = {sid: per for sid, per in latest.items() if len(per) >= 2}
    annotators = sorted({a for per in latest.values() for a in per})
    pairs = [
        (a1, a2)
        for i, a1 in enumerate(annotators)
        for a2 in annotators[i + 1 :]
    ]
    kappa: dict[tuple[str, str], float] = {}
    shared_counts: dict[tuple[str, str], int] = {}
    for a1, a2 in pairs:
        shared = sorted(
            sid for sid, per in latest.items() if a1 in per and a2 in per
        )
        if not shared:
            continue
        la = [latest[sid][a1].label.value for sid in shared]
        lb = [latest[sid][a2].label.value for sid in shared]
        kappa[(a1, a2)] = cohen_kappa(la, lb)
        shared_counts[(a1, a2)] = len(shared)
    if not kappa:
        raise InsufficientOverlap("no two annotators share a sentence")

    agreeing = sum(
        1 for per in multi.values() if len({r.label for r in per.values()}) == 1
    )
    raw = agreeing / len(multi) if multi else 1.0
    return AgreementReport(raw_agreement=raw, kappa=kappa, shared_counts=shared_counts)


# ---------------------------------------------------------------------------
# gold dataset


@dataclass(frozen=True)
class GoldDataset:
    items: tuple[tuple[str, ClarityLabel], ...]
    provenance: tuple[str, ...] = ()
    version: str = ""

    def label_counts(self) -> dict[ClarityLabel, int]:
        counts = {c: 0 for c in ClarityLabel}
        for _, label in self.items:
            counts[label] += 1
        return counts


@dataclass(frozen=True)
class GoldExportReport:
    kept: int
    excluded_disagreement: int
    excluded_risk: int
    excluded_na: int
    excluded_single: int


def _dataset_version(items: Sequence[tuple[str, ClarityLabel]]) -> str:
    h = hashlib.sha256()
    for text, label in items:
        h.update(text.encode("utf-8"))
        h.update(label.value.encode())
    return h.hexdigest()[:12]


def export_gold(
    records: Sequence[AnnotationRecord], corpus: Sequence[SentenceRecord]
) -> tuple[GoldDataset, GoldExportReport]:
    """Agreement-only gold set: keep sentences where every annotator's
    latest label agrees and the agreed label is a trainable class."""
    texts = {s.sentence_id: s.text for s in corpus}
    latest: dict[str, dict[str, AnnotationRecord]] = {}
    for r in records:
        per = latest.setdefault(r.sentence_id, {})
        cur = per.get(r.annotator_id)
        if cur is None or r.round > cur.round:
            per[r.annotator_id] = r

    items: list[tuple[str, ClarityLabel]] = []
    provenance: list[str] = []
    excluded = {"disagreement": 0, "risk": 0, "na": 0, "single": 0}
    for sid in sorted(latest):
        per = latest[sid]
        if len(per) < 2:
            excluded["single"] += 1
            continue
        labels = {r.label for r in per.values()}
        if len(labels) > 1:
            excluded["disagreement"] += 1
            continue
        (label,) = labels
        if label == AnnotationLabel.RISK:
            excluded["risk"] += 1
            continue
        if label == AnnotationLabel.NA:
            excluded["na"] += 1
            continue
        items.append((texts[sid], clarity_from_annotation(label)))
        provenance.extend(sorted(r.record_id() for r in per.values()))

    gold = GoldDataset(
        items=tuple(items),
        provenance=tuple(provenance),
        version=_dataset_version(items),
    )
    report = GoldExportReport(
        kept=len(items),
        excluded_disagreement=excluded["disagreement"],
        excluded_risk=excluded["risk"],
        excluded_na=excluded["na"],
        excluded_single=excluded["single"],
    )
    return gold, report


def write_gold_csv(gold: GoldDataset, path: str | Path) -> Path:
    p = Path(path)
    with p.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["text", "label"])
        for text, label in gold.items:
            w.writerow([text, label.value])
    return p


def write_gold_jsonl(gold: GoldDataset, path: str | Path) -> Path:
    p = Path(path)
    with p.open("w", encoding="utf-8") as f:
        for text, label in gold.items:
            f.write(json.dumps({"text": text, "label": label.value}, ensure_ascii=False) + "\n")
    return p


_LABEL_ALIASES = {
    "specific": AnnotationLabel.SPECIFIC,
    "ambiguous": AnnotationLabel.AMBIGUOUS,
    "generic": AnnotationLabel.GENERIC,
    "risk": AnnotationLabel.RISK,
    "na": AnnotationLabel.NA,
    "n/a": AnnotationLabel.NA,
}


def import_gold_dataset(
    path: str | Path,
    text_column: str = "text",
    label_column: str = "label",
) -> tuple[GoldDataset, dict]:
    """Load a released clarity dataset from CSV or JSON Lines.

    Column names are configurable so the published dataset's schema maps
    cleanly; header matching is case-insensitive. Rows with labels
    outside the three trainable classes (e.g. Risk) are dropped and
    counted in the returned import report.
    """
    p = Path(path)
    rows: list[dict]
    if p.suffix.lower() in {".jsonl", ".json"}:
        rows = [
            json.loads(line)
            for line in p.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    else:
        with p.open("r", encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{p}: no rows")

    def pick(row: dict, name: str) -> str:
        if name in row:
            return row[name]
        for k in row:
            if k.lower() == name.lower():
                return row[k]
        raise KeyError(f"{p}: column {name!r} not found in {sorted(row)}")

    items: list[tuple[str, ClarityLabel]] = []
    dropped: dict[str, int] = {}
    for row in rows:
        text = str(pick(row, text_column)).strip()
        raw_label = str(pick(row, label_column)).strip()
        label = _LABEL_ALIASES.get(raw_label.lower())
        if label is None or label not in TRAINABLE_LABELS or not text:
            dropped[raw_label] = dropped.get(raw_label, 0) + 1
            continue
        items.append((text, clarity_from_annotation(label)))
    gold = GoldDataset(items=tuple(items), version=_dataset_version(items))
    return gold, {"imported": len(items), "dropped": dropped}


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSet:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)


def make_splits(
    gold: GoldDataset,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitSet:
    """Per-label stratified shuffle into train/validation/test.

    Validation and test each take floor(fraction * n_label) items per
    label; remainders go to train. Deterministic under the seed.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    by_label: dict[ClarityLabel, list[int]] = {}
    for i, (_, label) in enumerate(gold.items):
        by_label.setdefault(label, []).append(i)
    for label, idxs in by_label.items():
        if len(idxs) < 3:
            raise LabelTooSmall(
                f"label {label.value} has {len(idxs)} items; cannot populate all splits"
            )
    rng = random.Random(seed)
    train: list[int] = []
    validation: list[int] = []
    test: list[int] = []
    for label in sorted(by_label, key=lambda l: l.value):
        idxs = list(by_label[label])
        rng.shuffle(idxs)
        n = len(idxs)
        n_val = int(fractions[1] * n)
        n_test = int(fractions[2] * n)
        validation.extend(idxs[:n_val])
        test.extend(idxs[n_val : n_val + n_test])
        train.extend(idxs[n_val + n_test :])
    return SplitSet(
        train=tuple(sorted(train)),
        validation=tuple(sorted(validation)),
        test=tuple(sorted(test)),
        seed=seed,
        fractions=fractions,
    )


def split_items(
    gold: GoldDataset, splits: SplitSet
) -> tuple[list, list, list]:
    pick = lambda ids: [gold.items[i] for i in ids]
    return pick(splits.train), pick(splits.validation), pick(splits.test)


# ---------------------------------------------------------------------------
# the iterative round


@dataclass(frozen=True)
class RoundSummary:
    round: int
    proposed: int
    reviewed: int
    resolved_total: int
    model_version: str
    retrained: bool


def run_annotation_round(
    store: AnnotationStore,
    model,
    reviewer: Callable[[list[WeakLabelProposal]], Iterable[tuple[str, AnnotationLabel, str]]],
    retrain: Callable[[list[tuple[str, ClarityLabel]]], object] | None = None,
    batch_size: int = 20,
) -> tuple[RoundSummary, object]:
    """One model-assisted annotation round.

    Proposes weak labels for unresolved sentences, hands the
    least-confident batch to the reviewer (which yields
    (sentence_id, label, annotator_id) decisions), records them in the
    next round, then retrains on all resolved labels. Returns the round
    summary and the (possibly new) model.
    """
    unresolved = store.unresolved_sentences()
    if not unresolved:
        raise NoUnresolvedSentences("annotation loop converged")
    proposals = propose_weak_labels(model, unresolved)
    queue = proposals[:batch_size]
    round_no = store.max_round() + 1
    reviewed = 0
    for sentence_id, label, annotator_id in reviewer(queue):
        store.record(
            AnnotationRecord(
                sentence_id=sentence_id,
                annotator_id=annotator_id,
                label=label,
                round=round_no,
            )
        )
        reviewed += 1

    resolved = [(s.text, label) for s, label in store.resolved_labels()]
    new_model = model
    retrained = False
    if retrain is not None and reviewed:
        new_model = retrain(resolved)
        retrained = True
    version = getattr(new_model, "version", "unversioned")
    summary = RoundSummary(
        round=round_no,
        proposed=len(proposals),
        reviewed=reviewed,
        resolved_total=len(resolved),
        model_version=version,
        retrained=retrained,
    )
    return summary, new_model
