"""Few-shot clarity classification: encoders, pairs, training, models."""

from .encoders import (
    FINETUNABLE,
    FROZEN,
    EncoderHandle,
    HashTokenizer,
    TransformerNet,
    load_encoder,
    local_encoder_names,
    parameter_digest,
    register_encoder_factory,
)
from .model import (
    CONTRASTIVE_HEAD,
    PROMPT_TUNED,
    ClarityModel,
    SoftPrompt,
    evaluate_clarity,
)
from .pairs import PairBatch, generate_contrastive_pairs
from .training import (
    finetune_encoder_contrastive,
    train_head,
    train_prompt_tuned,
)

__all__ = [
    "FINETUNABLE",
    "FROZEN",
    "EncoderHandle",
    "HashTokenizer",
    "TransformerNet",
    "load_encoder",
    "local_encoder_names",
    "parameter_digest",
    "register_encoder_factory",
    "CONTRASTIVE_HEAD",
    "PROMPT_TUNED",
    "ClarityModel",
    "SoftPrompt",
    "evaluate_clarity",
    "PairBatch",
    "generate_contrastive_pairs",
    "finetune_encoder_contrastive",
    "train_head",
    "train_prompt_tuned",
]
