"""Text encoders behind the clarity classifiers.

Every training operation is encoder-agnostic: it sees an EncoderHandle
and never a concrete architecture. The built-in "local:" encoders are
small transformers with deterministic name-seeded initialization, so a
handle is reconstructible from its name alone and the parameter digest
verifies the reconstruction. Other backbones (e.g. hub checkpoints)
plug in through register_encoder_factory without touching any caller.

Two families exist, mirroring the two fine-tuning strategies:
  - sentence encoders (L2-normalized mean-pooled output, fine-tunable)
  - masked-LM-style encoders (raw pooled hidden states, kept frozen and
    conditioned via soft prompts)
"""

from __future__ import annotations

import copy
import hashlib
import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

FINETUNABLE = "finetunable"
FROZEN = "frozen"


class HashTokenizer:
    """Word-level tokenizer hashing tokens into a fixed id space.

    No learned vocabulary file: ids are stable across runs and machines
    (crc32, not Python hash). Id 0 is reserved for padding.
    """

    def __init__(self, vocab_size: int, max_len: int):
        self.vocab_size = vocab_size
        self.max_len = max_len

    def token_ids(self, text: str) -> list[int]:
        words = "".join(c.lower() if c.isalnum() else " " for c in text).split()
        ids = [(zlib.crc32(w.encode("utf-8")) % (self.vocab_size - 1)) + 1 for w in words]
        return ids[: self.max_len] or [1]

    def batch(self, texts: Sequence[str]) -> tuple[torch.Tensor, torch.Tensor]:
        """Fixed-length padding: every sentence occupies max_len slots so
        numerics never depend on batch composition."""
        ids = torch.zeros(len(texts), self.max_len, dtype=torch.long)
        mask = torch.zeros(len(texts), self.max_len, dtype=torch.bool)
        for r, text in enumerate(texts):
            il = self.token_ids(text)
            ids[r, : len(il)] = torch.tensor(il, dtype=torch.long)
            mask[r, : len(il)] = True
        return ids, mask


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads, self.dk = heads, dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.ln1 = nn.LayerNorm(dim)
        self.ln2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(nn.Linear(dim, 4 * dim), nn.GELU(), nn.Linear(4 * dim, dim))

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, l, d = x.shape
        h = self.ln1(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        q = q.view(b, l, self.heads, self.dk).transpose(1, 2)
        k = k.view(b, l, self.heads, self.dk).transpose(1, 2)
        v = v.view(b, l, self.heads, self.dk).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(self.dk)
        att = att.masked_fill(~mask[:, None, None, :], float("-inf")).softmax(dim=-1)
        x = x + self.proj((att @ v).transpose(1, 2).reshape(b, l, d))
        return x + self.ff(self.ln2(x))


class TransformerNet(nn.Module):
    """Mean-pooling transformer encoder over hashed word ids."""

    def __init__(self, vocab_size: int, max_len: int, dim: int, layers: int, heads: int, seed: int):
        super().__init__()
        self.emb = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.pos = nn.Embedding(max_len, dim)
        self.blocks = nn.ModuleList(_Block(dim, heads) for _ in range(layers))
        self.ln_f = nn.LayerNorm(dim)
        g = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for m in self.modules():
                if isinstance(m, (nn.Linear, nn.Embedding)):
                    nn.init.normal_(m.weight, 0.0, 0.02, generator=g)
                    if isinstance(m, nn.Linear) and m.bias is not None:
                        nn.init.zeros_(m.bias)
            self.emb.weight[0].zero_()

    def forward(
        self,
        ids: torch.Tensor,
        mask: torch.Tensor,
        prompt: torch.Tensor | None = None,
        normalize: bool = False,
    ) -> torch.Tensor:
        b, l = ids.shape
        x = self.emb(ids) + self.pos.weight[None, :l]
        attend = mask
        pool = mask
        if prompt is not None:
            nv = prompt.shape[0]
            x = torch.cat([prompt[None].expand(b, -1, -1), x], dim=1)
            ones = torch.ones(b, nv, dtype=torch.bool)
            attend = torch.cat([ones, mask], dim=1)
            # virtual tokens steer attention but stay out of the pooled mean
            pool = torch.cat([torch.zeros(b, nv, dtype=torch.bool), mask], dim=1)
        for block in self.blocks:
            x = block(x, attend)
        x = self.ln_f(x)
        pooled = (x * pool[..., None]).sum(dim=1) / pool.sum(dim=1, keepdim=True)
        if normalize:
            pooled = nn.functional.normalize(pooled, dim=-1)
        return pooled


@dataclass
class EncoderHandle:
    """A usable encoder plus the identity needed to verify or rebuild it."""

    name: str
    dim: int
    mode: str  # finetunable | frozen
    net: TransformerNet
    tokenizer: HashTokenizer
    normalize_output: bool
    parameter_digest: str = ""
    loss_trace: tuple[float, ...] = ()
    epoch_losses: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode not in (FINETUNABLE, FROZEN):
            raise ValueError(f"unknown encoder mode {self.mode!r}")
        if not self.parameter_digest:
            self.parameter_digest = self.compute_digest()

    def compute_digest(self) -> str:
        return parameter_digest(self.net)

    def embed(self, texts: Sequence[str], batch_size: int = 64) -> np.ndarray:
        self.net.eval()
        chunks = []
        with torch.no_grad():
            for k in range(0, len(texts), batch_size):
                ids, mask = self.tokenizer.batch(texts[k : k + batch_size])
                chunks.append(self.net(ids, mask, normalize=self.normalize_output))
        return torch.cat(chunks).numpy() if chunks else np.zeros((0, self.dim))

    def clone(self) -> "EncoderHandle":
        return EncoderHandle(
            name=self.name,
            dim=self.dim,
            mode=self.mode,
            net=copy.deepcopy(self.net),
            tokenizer=self.tokenizer,
            normalize_output=self.normalize_output,
            parameter_digest=self.parameter_digest,
        )


def parameter_digest(net: nn.Module) -> str:
    h = hashlib.sha256()
    for name, tensor in sorted(net.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# registry

_LOCAL_SPECS: dict[str, dict] = {
    # sentence-embedding family (contrastively fine-tunable)
    "local:sentence-mini": dict(dim=128, layers=2, heads=4, family="sentence"),
    "local:sentence-micro": dict(dim=32, layers=1, heads=2, family="sentence", max_len=32),
    # masked-LM-style family (frozen backbone for prompt tuning)
    "local:mlm-mini": dict(dim=256, layers=2, heads=4, family="mlm"),
    "local:mlm-micro": dict(dim=32, layers=1, heads=2, family="mlm", max_len=32),
    "local:mlm-base": dict(dim=768, layers=2, heads=8, family="mlm"),
}
_DEFAULTS = dict(vocab_size=8192, max_len=64)

_FACTORIES: dict[str, Callable[[str], EncoderHandle]] = {}


def register_encoder_factory(prefix: str, factory: Callable[[str], EncoderHandle]) -> None:
    """Plug in another backbone source, e.g. hub checkpoints: any name
    starting with `prefix:` routes to `factory`."""
    _FACTORIES[prefix] = factory


def local_encoder_names() -> list[str]:
    return sorted(_LOCAL_SPECS)


def load_encoder(name: str, mode: str | None = None) -> EncoderHandle:
    """Build an encoder by name.

    Local names are deterministic: the same name always yields
    bit-identical weights, so artifacts can reference encoders by
    (name, digest) alone.
    """
    prefix = name.split(":", 1)[0]
    if prefix in _FACTORIES:
        return _FACTORIES[prefix](name)
    spec = _LOCAL_SPECS.get(name)
    if spec is None:
        raise KeyError(f"unknown encoder {name!r}; known: {local_encoder_names()}")
    params = {**_DEFAULTS, **{k: v for k, v in spec.items() if k != "family"}}
    seed = zlib.crc32(name.encode())
    net = TransformerNet(
        vocab_size=params["vocab_size"],
        max_len=params["max_len"],
        dim=params["dim"],
        layers=params["layers"],
        heads=params["heads"],
        seed=seed,
    )
    family = spec["family"]
    default_mode = FINETUNABLE if family == "sentence" else FROZEN
    return EncoderHandle(
        name=name,
        dim=params["dim"],
        mode=mode or default_mode,
        net=net,
        tokenizer=HashTokenizer(params["vocab_size"], params["max_len"]),
        normalize_output=(family == "sentence"),
    )
