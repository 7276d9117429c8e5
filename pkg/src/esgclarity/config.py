"""Pipeline configuration: a single validated YAML file drives every
subcommand, and its digest is stamped into every artifact produced
under it. Unknown keys are rejected so typos fail loudly."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigInvalid
from .ingest import DEFAULT_HEADING_PATTERNS


@dataclass(frozen=True)
class CorpusConfig:
    input_dir: str = "corpus"
    work_dir: str = "artifacts"
    heading_patterns: tuple[str, ...] = DEFAULT_HEADING_PATTERNS
    abbreviations_path: str | None = None


@dataclass(frozen=True)
class RelevanceConfig:
    lexicon_path: str | None = None
    cs_grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    seed: int = 0
    threshold: float = 0.5


@dataclass(frozen=True)
class ClarityConfig:
    contrastive_encoder: str = "local:sentence-mini"
    prompt_encoder: str = "local:mlm-mini"
    r_per_item: int = 20
    contrastive_epochs: int = 1
    contrastive_lr: float = 2e-3
    contrastive_batch_size: int = 32
    prompt_epochs: int = 16
    prompt_lr: float = 2e-2
    prompt_batch_size: int = 64
    num_virtual_tokens: int = 20
    seed: int = 0


@dataclass(frozen=True)
class ScoreSection:
    #: constant factor or [[min_x_s, factor], ...] step buckets
    scaling: object = 1.0
    config_version: str = "default"


@dataclass(frozen=True)
class SplitConfig:
    seed: int = 0
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class ZeroShotConfig:
    template_path: str | None = None
    client: str = "replay"  # replay | remote
    transcript_path: str | None = None
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "ESG_ZEROSHOT_API_KEY"
    requests_per_second: float = 1.0
    max_retries: int = 3


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8077


@dataclass(frozen=True)
class DatasetConfig:
    path: str | None = None
    text_column: str = "Text"
    label_column: str = "Label"


@dataclass(frozen=True)
class PipelineConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    relevance: RelevanceConfig = field(default_factory=RelevanceConfig)
    clarity: ClarityConfig = field(default_factory=ClarityConfig)
    score: ScoreSection = field(default_factory=ScoreSection)
    splits: SplitConfig = field(default_factory=SplitConfig)
    zeroshot: ZeroShotConfig = field(default_factory=ZeroShotConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)

    def digest(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def work_path(self, *parts: str) -> Path:
        p = Path(self.corpus.work_dir, *parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p


_SECTIONS = {f.name: f.type for f in fields(PipelineConfig)}


def _build_section(cls, data: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown key(s) {sorted(unknown)} in section {where!r}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad value in section {where!r}: {exc}") from exc


_SECTION_TYPES = {
    "corpus": CorpusConfig,
    "relevance": RelevanceConfig,
    "clarity": ClarityConfig,
    "score": ScoreSection,
    "splits": SplitConfig,
    "zeroshot": ZeroShotConfig,
    "service": ServiceConfig,
    "dataset": DatasetConfig,
}


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("config root must be a mapping")
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigInvalid(f"unknown top-level section(s): {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTION_TYPES.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigInvalid(f"section {name!r} must be a mapping")
        kwargs[name] = _build_section(cls, section, name)
    cfg = PipelineConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if not cfg.corpus.heading_patterns:
        raise ConfigInvalid("corpus.heading_patterns must be non-empty")
    if abs(sum(cfg.splits.fractions) - 1.0) > 1e-9:
        raise ConfigInvalid("splits.fractions must sum to 1")
    if cfg.zeroshot.client not in ("replay", "remote"):
        raise ConfigInvalid("zeroshot.client must be 'replay' or 'remote'")
    if not (0.0 < cfg.relevance.threshold < 1.0):
        raise ConfigInvalid("relevance.threshold must be in (0, 1)")
    if cfg.clarity.r_per_item < 1 or cfg.clarity.num_virtual_tokens < 1:
        raise ConfigInvalid("clarity counts must be >= 1")
    if not (0 < cfg.service.port < 65536):
        raise ConfigInvalid("service.port out of range")


def load_config(path: str | Path) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigInvalid(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"{p}: {exc}") from exc
    return config_from_dict(data)
