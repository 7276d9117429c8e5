"""Label vocabularies shared across the pipeline.

Two vocabularies exist on purpose: the model predicts three clarity
classes, while annotators work with five labels (the extra Risk/NA
labels never reach training).
"""

from __future__ import annotations

import enum


class ClarityLabel(str, enum.Enum):
    """The three trainable clarity classes, in canonical report order."""

    SPECIFIC = "Specific"
    AMBIGUOUS = "Ambiguous"
    GENERIC = "Generic"


#: Canonical order used for deterministic reporting and argmax tie-breaking.
CLARITY_ORDER: tuple[ClarityLabel, ...] = (
    ClarityLabel.SPECIFIC,
    ClarityLabel.AMBIGUOUS,
    ClarityLabel.GENERIC,
)


class AnnotationLabel(str, enum.Enum):
    """The five-way annotation vocabulary; only the first three train."""

    SPECIFIC = "Specific"
    AMBIGUOUS = "Ambiguous"
    GENERIC = "Generic"
    RISK = "Risk"
    NA = "NA"


#: Annotation labels that map onto trainable clarity classes.
TRAINABLE_LABELS: frozenset[AnnotationLabel] = frozenset(
    {AnnotationLabel.SPECIFIC, AnnotationLabel.AMBIGUOUS, AnnotationLabel.GENERIC}
)


class RelevanceLabel(str, enum.Enum):
    ESG = "ESG"
    NON_ESG = "NonESG"


def clarity_from_annotation(label: AnnotationLabel) -> ClarityLabel:
    """Map a trainable annotation label to its clarity class.

    Raises ValueError for Risk/NA, which have no clarity equivalent.
    """
    if label not in TRAINABLE_LABELS:
        raise ValueError(f"{label.value} is not a trainable clarity class")
    return ClarityLabel(label.value)
