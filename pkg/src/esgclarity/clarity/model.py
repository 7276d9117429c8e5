"""The trained clarity classifier and its on-disk artifact format.

A model is an encoder plus a 3-class linear head, optionally with a
soft prompt conditioning a frozen backbone. Artifacts reference the
encoder by (name, digest); tuned sentence-encoder weights are stored
alongside, while frozen backbones are rebuilt from the registry and
digest-verified on load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..labels import CLARITY_ORDER, ClarityLabel
from ..reporting import MetricsReport, compute_metrics
from .encoders import FROZEN, EncoderHandle, load_encoder

ARTIFACT_FORMAT_VERSION = "1"

CONTRASTIVE_HEAD = "ContrastiveHead"
PROMPT_TUNED = "PromptTuned"


@dataclass(frozen=True)
class SoftPrompt:
    num_virtual_tokens: int
    embeddings: np.ndarray  # (num_virtual_tokens, hidden width)

    def __post_init__(self):
        if self.embeddings.shape[0] != self.num_virtual_tokens:
            raise ValueError("prompt shape does not match num_virtual_tokens")
        if not np.isfinite(self.embeddings).all():
            raise ValueError("prompt embeddings must be finite")


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ClarityModel:
    kind: str
    encoder: EncoderHandle
    head_weights: np.ndarray  # (3, dim)
    head_bias: np.ndarray  # (3,)
    prompt: SoftPrompt | None = None
    label_order: tuple[ClarityLabel, ...] = CLARITY_ORDER
    training_meta: dict = field(default_factory=dict)
    version: str = ""

    def __post_init__(self):
        if self.kind not in (CONTRASTIVE_HEAD, PROMPT_TUNED):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if (self.prompt is not None) != (self.kind == PROMPT_TUNED):
            raise ValueError("soft prompt present iff the model is prompt-tuned")
        if self.kind == PROMPT_TUNED and self.encoder.mode != FROZEN:
            raise ValueError("prompt-tuned models require a frozen encoder")
        if not self.version:
            self.version = self._compute_version()

    def _compute_version(self) -> str:
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(self.encoder.parameter_digest.encode())
        h.update(np.ascontiguousarray(self.head_weights).tobytes())
        h.update(np.ascontiguousarray(self.head_bias).tobytes())
        if self.prompt is not None:
            h.update(np.ascontiguousarray(self.prompt.embeddings).tobytes())
        return h.hexdigest()[:12]

    # -- inference ----------------------------------------------------------

    def _pooled(self, texts: Sequence[str], batch_size: int = 64) -> np.ndarray:
        if self.kind == CONTRASTIVE_HEAD:
            return self.encoder.embed(texts, batch_size=batch_size)
        prompt = torch.from_numpy(self.prompt.embeddings).to(torch.float32)
        net = self.encoder.net
        net.eval()
        chunks = []
        with torch.no_grad():
            for k in range(0, len(texts), batch_size):
                ids, mask = self.encoder.tokenizer.batch(texts[k : k + batch_size])
                chunks.append(net(ids, mask, prompt=prompt))
        return torch.cat(chunks).numpy() if chunks else np.zeros((0, self.encoder.dim))

    def predict_proba(self, texts: Sequence[str], batch_size: int = 64) -> np.ndarray:
        pooled = self._pooled(texts, batch_size=batch_size)
        return _softmax(pooled @ self.head_weights.T + self.head_bias)

    def predict(self, text: str) -> tuple[ClarityLabel, np.ndarray]:
        """(label, distribution in canonical label order); argmax ties
        break toward the earlier canonical label."""
        probs = self.predict_proba([text])[0]
        return self.label_order[int(np.argmax(probs))], probs

    def predict_batch(
        self, texts: Sequence[str], batch_size: int = 64
    ) -> list[tuple[ClarityLabel, np.ndarray]]:
        probs = self.predict_proba(texts, batch_size=batch_size)
        return [(self.label_order[int(np.argmax(p))], p) for p in probs]

    # -- persistence --------------------------------------------------------

    def save(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "head.json").write_text(
            json.dumps(
                {"weights": self.head_weights.tolist(), "bias": self.head_bias.tolist()}
            )
            + "\n",
            encoding="utf-8",
        )
        files = {"head": "head.json"}
        if self.prompt is not None:
            np.save(d / "prompt.npy", self.prompt.embeddings)
            files["prompt"] = "prompt.npy"
        if self.kind == CONTRASTIVE_HEAD:
            torch.save(self.encoder.net.state_dict(), d / "encoder_state.pt")
            files["encoder_state"] = "encoder_state.pt"
        manifest = {
            "format_version": ARTIFACT_FORMAT_VERSION,
            "kind": self.kind,
            "encoder": {
                "name": self.encoder.name,
                "dim": self.encoder.dim,
                "mode": self.encoder.mode,
                "parameter_digest": self.encoder.parameter_digest,
            },
            "label_order": [l.value for l in self.label_order],
            "training_meta": self.training_meta,
            "version": self.version,
            "files": files,
        }
        (d / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return d

    @classmethod
    def load(cls, directory: str | Path) -> "ClarityModel":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        if manifest.get("format_version") != ARTIFACT_FORMAT_VERSION:
            raise ValueError(f"unsupported artifact format {manifest.get('format_version')!r}")
        enc_info = manifest["encoder"]
        base_name = enc_info["name"].split("+", 1)[0]
        encoder = load_encoder(base_name, mode=enc_info["mode"])
        files = manifest["files"]
        if "encoder_state" in files:
            encoder.net.load_state_dict(torch.load(d / files["encoder_state"], weights_only=True))
            encoder.name = enc_info["name"]
            encoder.parameter_digest = encoder.compute_digest()
        if encoder.parameter_digest != enc_info["parameter_digest"]:
            raise ValueError(
                f"encoder digest mismatch for {enc_info['name']}: artifact "
                f"{enc_info['parameter_digest'][:12]}.. vs rebuilt "
                f"{encoder.parameter_digest[:12]}.."
            )
        head = json.loads((d / files["head"]).read_text(encoding="utf-8"))
        prompt = None
        if "prompt" in files:
            emb = np.load(d / files["prompt"])
            prompt = SoftPrompt(num_virtual_tokens=emb.shape[0], embeddings=emb)
        return cls(
            kind=manifest["kind"],
            encoder=encoder,
            head_weights=np.asarray(head["weights"], dtype=np.float64),
            head_bias=np.asarray(head["bias"], dtype=np.float64),
            prompt=prompt,
            label_order=tuple(ClarityLabel(v) for v in manifest["label_order"]),
            training_meta=manifest.get("training_meta", {}),
            version=manifest["version"],
        )


def evaluate_clarity(
    model: ClarityModel, test: Sequence[tuple[str, ClarityLabel]]
) -> MetricsReport:
    """Macro precision/recall/F1, accuracy, and the 3x3 confusion matrix."""
    preds = model.predict_batch([t for t, _ in test])
    pairs = [(gold, label) for (_, gold), (label, _) in zip(test, preds)]
    return compute_metrics(pairs, classes=model.label_order)
