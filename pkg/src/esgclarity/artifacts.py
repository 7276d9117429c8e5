"""Shared artifact I/O: prediction JSON Lines and config-digest sidecars.

Artifacts are byte-identical across re-runs with identical inputs and
config, so nothing here writes wall-clock timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .labels import ClarityLabel


@dataclass(frozen=True)
class PredictionRow:
    sentence_id: str
    label: ClarityLabel
    probs: tuple[float, ...]


def write_predictions_jsonl(
    rows: Iterable[tuple[str, ClarityLabel, Sequence[float]]], path: str | Path
) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as f:
        for sentence_id, label, probs in rows:
            f.write(
                json.dumps(
                    {
                        "sentence_id": sentence_id,
                        "label": label.value,
                        "probs": [float(p) for p in probs],
                    }
                )
                + "\n"
            )
            n += 1
    return n


def read_predictions_jsonl(path: str | Path) -> list[PredictionRow]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            rows.append(
                PredictionRow(
                    sentence_id=obj["sentence_id"],
                    label=ClarityLabel(obj["label"]),
                    probs=tuple(obj.get("probs", ())),
                )
            )
    return rows


def write_meta_sidecar(artifact_path: str | Path, meta: dict) -> Path:
    """Write `<artifact>.meta.json` carrying the producing config digest.

    Used for CSV artifacts whose column schema is pinned and cannot embed
    the digest inline.
    """
    side = Path(str(artifact_path) + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return side
