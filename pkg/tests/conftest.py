from __future__ import annotations

import random

import numpy as np
import pytest

from esgclarity.ingest import Section, SentenceRecord
from esgclarity.labels import ClarityLabel


@pytest.fixture
def section_factory():
    def make(text: str, doc_id: str = "doc1") -> Section:
        return Section(doc_id=doc_id, name="Principal Investment Strategy",
                       text=text, char_span=(0, len(text)))

    return make


@pytest.fixture
def sentence_factory():
    def make(text: str, doc_id: str = "doc1", index: int = 0) -> SentenceRecord:
        return SentenceRecord(
            sentence_id=f"{doc_id}:{index}", doc_id=doc_id,
            section_name="Principal Investment Strategy", index=index, text=text,
        )

    return make


class SyntheticEncoder:
    """Embedding lookup standing in for a real encoder: maps each text to
    a fixed vector, so head training is isolated from encoder behavior."""

    def __init__(self, table: dict[str, np.ndarray], dim: int):
        self.table = table
        self.dim = dim
        self.name = "synthetic:test"
        self.mode = "finetunable"
        self.parameter_digest = "synthetic"
        self.loss_trace = ()

    def embed(self, texts, batch_size: int = 64) -> np.ndarray:
        return np.stack([self.table[t] for t in texts])


@pytest.fixture
def cluster_encoder():
    """Three well-separated Gaussian clusters keyed by synthetic texts.

    Returns (encoder, labeled) where labeled pairs each text with the
    cluster's clarity label; separation ~10 sigma.
    """
    rng = np.random.default_rng(42)
    centers = {
        ClarityLabel.SPECIFIC: np.array([10.0, 0.0, 0.0, 0.0]),
        ClarityLabel.AMBIGUOUS: np.array([0.0, 10.0, 0.0, 0.0]),
        ClarityLabel.GENERIC: np.array([0.0, 0.0, 10.0, 0.0]),
    }
    table: dict[str, np.ndarray] = {}
    labeled: list[tuple[str, ClarityLabel]] = []
    for label, center in centers.items():
        for i in range(30):
            text = f"{label.value.lower()} sentence {i}"
            table[text] = center + rng.normal(0, 1.0, size=4)
            labeled.append((text, label))
    random.Random(0).shuffle(labeled)
    return SyntheticEncoder(table, dim=4), labeled
