"""Contrastive pair generation for few-shot fine-tuning."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from ..errors import SingleClassSet
from ..labels import ClarityLabel


@dataclass(frozen=True)
class PairBatch:
    #: (text_a, text_b, target) with target 1.0 iff the source labels match.
    pairs: tuple[tuple[str, str, float], ...]
    seed: int
    single_class: bool = False  # lenient-mode warning: no negatives possible


def generate_contrastive_pairs(
    labeled: Sequence[tuple[str, ClarityLabel]],
    r_per_item: int = 20,
    seed: int = 0,
    strict: bool = True,
) -> PairBatch:
    """For each item, sample r same-label partners (target 1.0) and r
    different-label partners (target 0.0).

    Sampling is without replacement while the partner pool lasts, then
    with replacement; an item never pairs with itself. Deterministic
    under the seed. A single-class input has no negative partners:
    strict mode raises SingleClassSet, lenient mode returns positives
    only with the warning flag set.
    """
    if len(labeled) < 2:
        raise ValueError("need at least 2 labeled items")
    if r_per_item < 1:
        raise ValueError("r_per_item must be >= 1")
    labels = {label for _, label in labeled}
    single_class = len(labels) < 2
    if single_class and strict:
        raise SingleClassSet("no negative partner exists for a single-class set")

    rng = random.Random(seed)
    by_label: dict[ClarityLabel, list[int]] = {}
    for i, (_, label) in enumerate(labeled):
        by_label.setdefault(label, []).append(i)

    def draw(pool: list[int], r: int) -> list[int]:
        if not pool:
            return []
        if len(pool) >= r:
            return rng.sample(pool, r)
        extra = [rng.choice(pool) for _ in range(r - len(pool))]
        return rng.sample(pool, len(pool)) + extra

    pairs: list[tuple[str, str, float]] = []
    for i, (text, label) in enumerate(labeled):
        same = [j for j in by_label[label] if j != i]
        diff = [j for lab, idxs in by_label.items() if lab != label for j in idxs]
        for j in draw(same, r_per_item):
            pairs.append((text, labeled[j][0], 1.0))
        for j in draw(diff, r_per_item):
            pairs.append((text, labeled[j][0], 0.0))
    rng.shuffle(pairs)
    return PairBatch(pairs=tuple(pairs), seed=seed, single_class=single_class)
