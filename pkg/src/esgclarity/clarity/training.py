"""Few-shot training strategies for the clarity classifier.

Two routes produce the same ClarityModel surface:
  - contrastive fine-tuning of a sentence encoder on labeled pairs,
    then a multinomial linear head on the tuned embeddings;
  - soft-prompt tuning, where only a small matrix of virtual-token
    embeddings and the head receive gradients and the backbone stays
    bit-identical (digest-checked every run).
"""

from __future__ import annotations

import math
import random
from typing import Sequence

import numpy as np
import torch
from sklearn.linear_model import LogisticRegression
from torch import nn

from ..errors import MissingClass, NonFiniteLoss
from ..labels import CLARITY_ORDER, ClarityLabel
from .encoders import FINETUNABLE, FROZEN, EncoderHandle
from .model import CONTRASTIVE_HEAD, PROMPT_TUNED, ClarityModel, SoftPrompt
from .pairs import PairBatch


def _require_all_classes(labeled: Sequence[tuple[str, ClarityLabel]]) -> None:
    present = {label for _, label in labeled}
    missing = [c.value for c in CLARITY_ORDER if c not in present]
    if missing:
        raise MissingClass(f"labels absent from the training set: {missing}")


def finetune_encoder_contrastive(
    encoder: EncoderHandle,
    pairs: PairBatch,
    epochs: int = 1,
    learning_rate: float = 2e-3,
    batch_size: int = 32,
) -> EncoderHandle:
    """Cosine-similarity regression over sentence pairs.

    The predicted cosine of each pair's embeddings is pushed toward its
    0/1 target (squared error). Returns a new handle with per-step and
    per-epoch loss traces attached; the input encoder is not mutated.
    """
    if encoder.mode != FINETUNABLE:
        raise ValueError(f"encoder {encoder.name} is not finetunable")
    tuned = encoder.clone()
    if epochs == 0 or not pairs.pairs:
        tuned.loss_trace = ()
        tuned.epoch_losses = ()
        return tuned

    torch.manual_seed(pairs.seed)
    net = tuned.net
    start_loss = _pair_set_loss(tuned, pairs)
    net.train()
    opt = torch.optim.AdamW(net.parameters(), lr=learning_rate)
    tok = tuned.tokenizer
    step_losses: list[float] = []
    epoch_means: list[float] = []
    order = list(range(len(pairs.pairs)))
    for epoch in range(epochs):
        random.Random(pairs.seed * 1000 + epoch).shuffle(order)
        epoch_sum, epoch_n = 0.0, 0
        for k in range(0, len(order), batch_size):
            batch = [pairs.pairs[i] for i in order[k : k + batch_size]]
            ids_a, mask_a = tok.batch([a for a, _, _ in batch])
            ids_b, mask_b = tok.batch([b for _, b, _ in batch])
            target = torch.tensor([t for _, _, t in batch], dtype=torch.float32)
            ea = net(ids_a, mask_a, normalize=True)
            eb = net(ids_b, mask_b, normalize=True)
            loss = (((ea * eb).sum(dim=-1) - target) ** 2).mean()
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteLoss(
                    f"contrastive loss diverged at step {len(step_losses)}; "
                    f"lower the learning rate (currently {learning_rate})"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            step_losses.append(value)
            epoch_sum += value * len(batch)
            epoch_n += len(batch)
        epoch_means.append(epoch_sum / epoch_n)

    net.eval()
    tuned.name = f"{encoder.name}+contrastive"
    tuned.parameter_digest = tuned.compute_digest()
    tuned.loss_trace = tuple(step_losses)
    # endpoints of the trace: whole-pair-set loss before and after
    tuned.epoch_losses = (start_loss, *epoch_means, _pair_set_loss(tuned, pairs))
    return tuned


def _pair_set_loss(encoder: EncoderHandle, pairs: PairBatch, batch_size: int = 64) -> float:
    """Mean cosine-regression loss of the current weights over every pair."""
    net = encoder.net
    was_training = net.training
    net.eval()
    tok = encoder.tokenizer
    total, count = 0.0, 0
    with torch.no_grad():
        for k in range(0, len(pairs.pairs), batch_size):
            batch = pairs.pairs[k : k + batch_size]
            ids_a, mask_a = tok.batch([a for a, _, _ in batch])
            ids_b, mask_b = tok.batch([b for _, b, _ in batch])
            target = torch.tensor([t for _, _, t in batch], dtype=torch.float32)
            ea = net(ids_a, mask_a, normalize=True)
            eb = net(ids_b, mask_b, normalize=True)
            total += float((((ea * eb).sum(dim=-1) - target) ** 2).sum())
            count += len(batch)
    if was_training:
        net.train()
    return total / count


def train_head(
    encoder: EncoderHandle,
    labeled: Sequence[tuple[str, ClarityLabel]],
    seed: int = 0,
) -> ClarityModel:
    """Multinomial linear head on frozen-at-this-point embeddings."""
    _require_all_classes(labeled)
    texts = [t for t, _ in labeled]
    y = np.array([CLARITY_ORDER.index(label) for _, label in labeled])
    emb = encoder.embed(texts)
    clf = LogisticRegression(max_iter=5000, random_state=seed)
    clf.fit(emb, y)
    # classes_ is sorted integer indices 0..2, already canonical order
    return ClarityModel(
        kind=CONTRASTIVE_HEAD,
        encoder=encoder,
        head_weights=clf.coef_.astype(np.float64),
        head_bias=clf.intercept_.astype(np.float64),
        training_meta={
            "seed": seed,
            "train_size": len(labeled),
            "pair_count": len(encoder.loss_trace),
            "encoder": encoder.name,
        },
    )


def train_prompt_tuned(
    encoder: EncoderHandle,
    labeled: Sequence[tuple[str, ClarityLabel]],
    num_virtual_tokens: int = 20,
    epochs: int = 16,
    seed: int = 0,
    learning_rate: float = 2e-2,
    batch_size: int = 64,
) -> ClarityModel:
    """Soft-prompt tuning of a frozen backbone.

    Only the virtual-token matrix and the 3-class head train; the
    backbone's parameter digest is asserted bit-identical afterwards.
    Trainable parameters: num_virtual_tokens x hidden + (hidden x 3 + 3).
    """
    if encoder.mode != FROZEN:
        raise ValueError(f"prompt tuning requires a frozen encoder, got {encoder.mode}")
    if num_virtual_tokens < 1:
        raise ValueError("num_virtual_tokens must be >= 1")
    _require_all_classes(labeled)

    net = encoder.net
    digest_before = encoder.compute_digest()
    for p in net.parameters():
        p.requires_grad_(False)

    g = torch.Generator().manual_seed(seed)
    # initialize virtual tokens from rows of the input-embedding table
    rows = torch.randint(1, net.emb.weight.shape[0], (num_virtual_tokens,), generator=g)
    prompt = nn.Parameter(net.emb.weight[rows].clone().detach())
    head = nn.Linear(encoder.dim, len(CLARITY_ORDER))
    with torch.no_grad():
        nn.init.normal_(head.weight, 0.0, 0.02, generator=g)
        head.bias.zero_()

    trainable = [prompt, head.weight, head.bias]
    expected = num_virtual_tokens * encoder.dim + encoder.dim * 3 + 3
    assert sum(p.numel() for p in trainable) == expected

    y = torch.tensor([CLARITY_ORDER.index(label) for _, label in labeled])
    texts = [t for t, _ in labeled]
    opt = torch.optim.AdamW(trainable, lr=learning_rate)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(epochs, 1))
    ce = nn.CrossEntropyLoss()
    tok = encoder.tokenizer
    net.eval()  # no dropout anywhere; eval for clarity
    order = list(range(len(texts)))
    for epoch in range(epochs):
        random.Random(seed * 1000 + epoch).shuffle(order)
        for k in range(0, len(order), batch_size):
            idx = order[k : k + batch_size]
            ids, mask = tok.batch([texts[i] for i in idx])
            logits = head(net(ids, mask, prompt=prompt))
            loss = ce(logits, y[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise NonFiniteLoss(
                    f"prompt-tuning loss diverged in epoch {epoch}; "
                    f"lower the learning rate (currently {learning_rate})"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
        sched.step()

    digest_after = encoder.compute_digest()
    if digest_after != digest_before:
        raise RuntimeError("frozen backbone changed during prompt tuning")

    return ClarityModel(
        kind=PROMPT_TUNED,
        encoder=encoder,
        head_weights=head.weight.detach().numpy().astype(np.float64),
        head_bias=head.bias.detach().numpy().astype(np.float64),
        prompt=SoftPrompt(
            num_virtual_tokens=num_virtual_tokens,
            embeddings=prompt.detach().numpy().astype(np.float32),
        ),
        training_meta={
            "seed": seed,
            "epochs": epochs,
            "num_virtual_tokens": num_virtual_tokens,
            "trainable_parameters": expected,
            "train_size": len(labeled),
            "encoder": encoder.name,
        },
    )
