"""Pipeline configuration: one YAML file, sections named after the pipeline stages."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .agentic.clients import ChatClientSpec
from .autoencoder import TrainingConfig
from .embedding import EmbeddingProviderSpec
from .errors import ConfigError
from .sampling import SamplePlan

STAGES = ("ingest", "embed", "compress", "factorize", "cluster", "sample", "themes", "report")


@dataclass(frozen=True)
class CorpusSettings:
    path: str
    format: str = "jsonl"
    tag_variants: tuple = ()
    case_insensitive: bool = True
    language: Optional[str] = "en"


@dataclass(frozen=True)
class ClusteringSettings:
    k: Optional[int] = None  # fixed k; skips the elbow choice
    seed: int = 0
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-8


@dataclass(frozen=True)
class AgenticSettings:
    llm1: ChatClientSpec
    llm2: ChatClientSpec
    Q: float = 0.8
    max_iterations: int = 3
    max_workers: int = 1
    min_interval: float = 0.0
    extractor: Optional[ChatClientSpec] = None
    prompts_dir: Optional[str] = None
    prompt_overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    corpus: CorpusSettings
    provider: EmbeddingProviderSpec
    training: TrainingConfig
    agentic: AgenticSettings
    svd_threshold: float = 0.90
    k_range: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    clustering: ClusteringSettings = field(default_factory=ClusteringSettings)
    sample_plan: SamplePlan = field(default_factory=SamplePlan)
    run_dir: str = "runs"
    run_id: Optional[str] = None
    base_dir: str = "."

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def run_path(self) -> Path:
        return self.resolve(self.run_dir) / self.effective_run_id

    @property
    def effective_run_id(self) -> str:
        from .artifacts import sha256_json
        return self.run_id or "run-" + sha256_json(self.snapshot())[:12]

    def snapshot(self) -> dict:
        """Plain-data view of the config (what the manifest stores and hashes)."""
        return {
            "corpus": asdict(self.corpus),
            "provider": self.provider.identity(),
            "training": {**asdict(self.training), "ratios": [str(r) for r in self.training.ratios]},
            "svd_threshold": self.svd_threshold,
            "k_range": list(self.k_range),
            "clustering": asdict(self.clustering),
            "sample_plan": self.sample_plan.to_dict(),
            "agentic": _agentic_snapshot(self.agentic),
            "run_dir": self.run_dir,
            "run_id": self.run_id,
        }


def _agentic_snapshot(a: AgenticSettings) -> dict:
    d = asdict(a)
    for key in ("llm1", "llm2", "extractor"):
        if d[key] is not None:
            d[key]["script"] = list(d[key]["script"])
    return d


def _build(cls, data, where: str, **extra):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**{**data, **extra})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _chat_spec(data, where: str, base: Path) -> Optional[ChatClientSpec]:
    if data is None:
        return None
    data = dict(data)
    script_file = data.pop("script_file", None)
    if script_file is not None:
        path = Path(script_file)
        path = path if path.is_absolute() else base / path
        if not path.is_file():
            raise ConfigError(f"{where}: script_file {path} not found")
        data["script"] = yaml.safe_load(path.read_text(encoding="utf-8"))
    return _build(ChatClientSpec, data, where)


def config_from_dict(raw: dict, base_dir=".") -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    base = Path(base_dir)
    top = {f.name for f in fields(PipelineConfig)} - {"base_dir"}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("corpus", "provider", "agentic"):
        if key not in raw:
            raise ConfigError(f"missing section {key!r}")

    corpus = dict(raw["corpus"] or {})
    if "tag_variants" in corpus:
        corpus["tag_variants"] = tuple(corpus["tag_variants"] or ())
    corpus = _build(CorpusSettings, corpus, "corpus")
    if corpus.format not in ("jsonl", "csv"):
        raise ConfigError(f"corpus: unknown format {corpus.format!r}")

    provider = dict(raw["provider"])
    if "preset" in provider:
        from .embedding import PRESET_DIMENSIONS
        preset = provider.pop("preset")
        if preset not in PRESET_DIMENSIONS:
            raise ConfigError(f"provider: unknown preset {preset!r}")
        provider.setdefault("name", preset)
        provider.setdefault("dimension", PRESET_DIMENSIONS[preset])
    if "lexicons" in provider:
        provider["lexicons"] = tuple(tuple(x) for x in provider["lexicons"])
    provider = _build(EmbeddingProviderSpec, provider, "provider")

    training = dict(raw.get("training") or {})
    if "ratios" in training:
        training["ratios"] = tuple(str(r) for r in training["ratios"])
    training = _build(TrainingConfig, training, "training")

    ag = dict(raw["agentic"] or {})
    for key in ("llm1", "llm2"):
        if key not in ag:
            raise ConfigError(f"agentic: missing {key}")
    ag["llm1"] = _chat_spec(ag["llm1"], "agentic.llm1", base)
    ag["llm2"] = _chat_spec(ag["llm2"], "agentic.llm2", base)
    ag["extractor"] = _chat_spec(ag.get("extractor"), "agentic.extractor", base)
    ag["prompt_overrides"] = dict(ag.get("prompt_overrides") or {})
    agentic = _build(AgenticSettings, ag, "agentic")
    if not 0 <= agentic.Q <= 1:
        raise ConfigError("agentic: Q must lie in [0, 1]")
    if agentic.max_iterations < 1:
        raise ConfigError("agentic: max_iterations must be >= 1")

    clustering = _build(ClusteringSettings, raw.get("clustering"), "clustering")
    plan = _build(SamplePlan, raw.get("sample_plan"), "sample_plan")

    k_range = tuple(int(k) for k in raw.get("k_range", PipelineConfig.k_range))
    if len(k_range) < 3 or any(b <= a for a, b in zip(k_range, k_range[1:])) or k_range[0] < 1:
        raise ConfigError("k_range must be >= 3 ascending positive integers")
    threshold = float(raw.get("svd_threshold", 0.90))
    if not 0 < threshold <= 1:
        raise ConfigError("svd_threshold must lie in (0, 1]")

    cfg = PipelineConfig(
        corpus=corpus, provider=provider, training=training, agentic=agentic,
        svd_threshold=threshold, k_range=k_range, clustering=clustering, sample_plan=plan,
        run_dir=str(raw.get("run_dir", "runs")), run_id=raw.get("run_id"), base_dir=str(base),
    )
    validate_paths(cfg)
    return cfg


def validate_paths(cfg: PipelineConfig) -> None:
    if not cfg.resolve(cfg.corpus.path).is_file():
        raise ConfigError(f"corpus file not found: {cfg.resolve(cfg.corpus.path)}")
    a = cfg.agentic
    if a.prompts_dir is not None and not cfg.resolve(a.prompts_dir).is_dir():
        raise ConfigError(f"prompts_dir not found: {a.prompts_dir}")
    for name, path in a.prompt_overrides.items():
        if not cfg.resolve(path).is_file():
            raise ConfigError(f"prompt override {name!r}: {path} not found")


def load_config(path, overrides: Optional[dict] = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    raw = raw or {}
    if overrides:
        raw = {**raw, **overrides}
    return config_from_dict(raw, base_dir=path.parent.resolve())
