"""Fund language scoring, ranking, and quintile ratings.

The score is the specificity-to-ambiguity ratio of a document's clarity
counts times a configurable scaling factor, with two total-function
conventions: a document with no Specific sentences scores 0, and a zero
Ambiguous count falls back to a denominator of one so scores stay
finite. Ratings quintile the scored universe (5 = most specific).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .artifacts import write_meta_sidecar
from .labels import ClarityLabel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClarityCounts:
    doc_id: str
    x_s: int
    x_a: int
    x_g: int

    def __post_init__(self):
        if min(self.x_s, self.x_a, self.x_g) < 0:
            raise ValueError("clarity counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.x_s + self.x_a + self.x_g


@dataclass(frozen=True)
class ScoreConfig:
    """Scaling is either a positive constant or a step function on X_S.

    A step function is given as ((min_x_s, factor), ...) sorted ascending
    with the first bucket starting at 0; the factor of the last bucket
    whose lower bound does not exceed X_S applies.
    """

    scaling: float | tuple[tuple[int, float], ...] = 1.0
    config_version: str = "default"

    def __post_init__(self):
        if isinstance(self.scaling, (int, float)):
            if self.scaling <= 0:
                raise ValueError("scaling factor must be strictly positive")
        else:
            steps = tuple((int(lo), float(f)) for lo, f in self.scaling)
            if not steps or steps[0][0] != 0:
                raise ValueError("step scaling must start at X_S bucket 0")
            if any(f <= 0 for _, f in steps):
                raise ValueError("all step factors must be strictly positive")
            if list(steps) != sorted(steps, key=lambda s: s[0]):
                raise ValueError("step buckets must be sorted ascending")
            object.__setattr__(self, "scaling", steps)

    def factor(self, x_s: int) -> float:
        if isinstance(self.scaling, (int, float)):
            return float(self.scaling)
        result = self.scaling[0][1]
        for lo, f in self.scaling:
            if x_s >= lo:
                result = f
        return result

    def as_dict(self) -> dict:
        scaling = (
            self.scaling
            if isinstance(self.scaling, (int, float))
            else [list(s) for s in self.scaling]
        )
        return {"scaling": scaling, "config_version": self.config_version}


@dataclass(frozen=True)
class FundScore:
    doc_id: str
    counts: ClarityCounts
    ratio: float
    score: float
    config_version: str = "default"


def count_labels(
    predictions: Sequence[tuple[str, ClarityLabel]],
    universe: Iterable[str] | None = None,
) -> list[ClarityCounts]:
    """Per-document label counts from (sentence_id, label) predictions.

    sentence_id is doc_id + ":" + index, so the document is recovered
    from the id itself. Documents listed in `universe` but absent from
    the predictions emit (0,0,0) and are flagged in logs.
    """
    tallies: dict[str, dict[ClarityLabel, int]] = {}
    order: list[str] = []
    for sentence_id, label in predictions:
        doc_id = sentence_id.rsplit(":", 1)[0]
        if doc_id not in tallies:
            tallies[doc_id] = {c: 0 for c in ClarityLabel}
            order.append(doc_id)
        tallies[doc_id][label] += 1
    if universe is not None:
        for doc_id in universe:
            if doc_id not in tallies:
                log.warning("%s: no clarity-classified ESG sentences; counts (0,0,0)", doc_id)
                tallies[doc_id] = {c: 0 for c in ClarityLabel}
                order.append(doc_id)
    return [
        ClarityCounts(
            doc_id=d,
            x_s=tallies[d][ClarityLabel.SPECIFIC],
            x_a=tallies[d][ClarityLabel.AMBIGUOUS],
            x_g=tallies[d][ClarityLabel.GENERIC],
        )
        for d in order
    ]


def language_score(counts: ClarityCounts, config: ScoreConfig | None = None) -> FundScore:
    """The scaled specificity ratio for one document.

    Zero conventions: X_S = 0 scores 0; X_A = 0 uses a denominator of
    one, so the ratio equals X_S.
    """
    config = config or ScoreConfig()
    if counts.x_s == 0:
        ratio = 0.0
    elif counts.x_a == 0:
        ratio = float(counts.x_s)
    else:
        ratio = counts.x_s / counts.x_a
    score = ratio * config.factor(counts.x_s)
    return FundScore(
        doc_id=counts.doc_id,
        counts=counts,
        ratio=ratio,
        score=score,
        config_version=config.config_version,
    )


@dataclass(frozen=True)
class RatingEntry:
    doc_id: str
    score: float
    rank: int
    rating: int


@dataclass(frozen=True)
class RatingTable:
    entries: tuple[RatingEntry, ...]
    quantile_method: str = "nearest-rank"
    degenerate: bool = False  # universe smaller than the quintile count

    def by_doc(self) -> dict[str, RatingEntry]:
        return {e.doc_id: e for e in self.entries}


def rank_universe(scores: Sequence[FundScore]) -> list[tuple[FundScore, int]]:
    """Descending by score, rank 1 = most specific; ties break ascending
    by doc_id for determinism."""
    ordered = sorted(scores, key=lambda s: (-s.score, s.doc_id))
    return [(s, i + 1) for i, s in enumerate(ordered)]


def assign_ratings(scores: Sequence[FundScore]) -> RatingTable:
    """Nearest-rank quintile ratings, 5 = most specific.

    A document at ascending-score position k gets 1 + floor(5(k-1)/N);
    every member of a tie group takes the group's minimum rating. A
    universe smaller than 5 is degenerate: all ratings emit as 3.
    """
    n = len(scores)
    if n == 0:
        return RatingTable(entries=(), degenerate=True)
    ranked = rank_universe(scores)
    if n < 5:
        entries = tuple(
            RatingEntry(s.doc_id, s.score, rank, 3) for s, rank in ranked
        )
        return RatingTable(entries=entries, degenerate=True)

    ascending = sorted(scores, key=lambda s: (s.score, s.doc_id))
    position_rating = [1 + (5 * k) // n for k in range(n)]
    rating_by_score: dict[float, int] = {}
    for k, s in enumerate(ascending):
        r = position_rating[k]
        if s.score not in rating_by_score or r < rating_by_score[s.score]:
            rating_by_score[s.score] = r

    entries = tuple(
        RatingEntry(s.doc_id, s.score, rank, rating_by_score[s.score])
        for s, rank in ranked
    )
    return RatingTable(entries=entries)


# ---------------------------------------------------------------------------
# artifacts

CSV_HEADER = "doc_id,X_S,X_A,X_G,ratio,score,rank,rating"


def write_ratings_csv(
    table: RatingTable,
    scores: Sequence[FundScore],
    path: str | Path,
    config_digest: str | None = None,
) -> Path:
    by_doc = {s.doc_id: s for s in scores}
    lines = [CSV_HEADER]
    for e in table.entries:
        s = by_doc[e.doc_id]
        lines.append(
            f"{e.doc_id},{s.counts.x_s},{s.counts.x_a},{s.counts.x_g},"
            f"{s.ratio:.6f},{s.score:.6f},{e.rank},{e.rating}"
        )
    p = Path(path)
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if config_digest is not None:
        write_meta_sidecar(p, {"config_digest": config_digest, "rows": len(table.entries)})
    return p


def write_ratings_json(
    table: RatingTable,
    scores: Sequence[FundScore],
    config: ScoreConfig,
    path: str | Path,
    config_digest: str | None = None,
) -> Path:
    by_doc = {s.doc_id: s for s in scores}
    payload = {
        "score_config": config.as_dict(),
        "config_digest": config_digest,
        "quantile_method": table.quantile_method,
        "degenerate": table.degenerate,
        "entries": [
            {
                "doc_id": e.doc_id,
                "X_S": by_doc[e.doc_id].counts.x_s,
                "X_A": by_doc[e.doc_id].counts.x_a,
                "X_G": by_doc[e.doc_id].counts.x_g,
                "ratio": by_doc[e.doc_id].ratio,
                "score": e.score,
                "rank": e.rank,
                "rating": e.rating,
            }
            for e in table.entries
        ],
    }
    p = Path(path)
    p.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return p


def is_finite_score(score: FundScore) -> bool:
    return math.isfinite(score.ratio) and math.isfinite(score.score)
