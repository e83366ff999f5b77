"""Stage-by-stage runner with hash-chained artifacts and a run manifest.

Each stage reads only the artifacts its predecessor recorded in
``manifest.json`` and writes its own. A stage's fingerprint hashes its config
section together with the upstream artifact hashes, so a stage is skipped
exactly when neither its inputs nor its settings changed.
"""

from __future__ import annotations

import csv
import logging
import os
import shutil
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import autoencoder as ae
from .agentic import PromptTemplates, RefinementTranscript, run_all_clusters
from .agentic.loop import RefinementError
from .artifacts import dump_json, load_json, load_matrix, save_matrix, sha256_file, sha256_json
from .config import STAGES, PipelineConfig
from .corpus import (
    clean_corpus, filter_by_tags, filter_language, load_corpus, read_corpus_jsonl, write_corpus_jsonl,
)
from .embedding import EmbeddingMatrix, embed_corpus
from .errors import BeyondWordsError, ExternalServiceError, MissingArtifact, StageError
from .latent import cluster_quality, elbow_select, explained_variance, full_svd, kmeans, select_rank
from .report import metrics_table, write_report
from .sampling import RepresentativeSample, select_representatives

log = logging.getLogger(__name__)

UPSTREAM = {s: (STAGES[i - 1] if i else None) for i, s in enumerate(STAGES)}
ARMS = ("with_ae", "without_ae")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _ratio_dir(ratio) -> str:
    return str(ratio).replace("/", "_")


@dataclass
class StageResult:
    stage: str
    skipped: bool
    artifacts: dict = field(default_factory=dict)


class Run:
    """One run directory: its manifest, lock, and artifact bookkeeping."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = cfg.run_path
        self.manifest_path = self.root / "manifest.json"

    # -- manifest -----------------------------------------------------
    def load_manifest(self) -> dict:
        if self.manifest_path.is_file():
            return load_json(self.manifest_path)
        return {"run_id": self.cfg.effective_run_id, "stages": {}}

    def save_manifest(self, manifest: dict) -> None:
        manifest["run_id"] = self.cfg.effective_run_id
        manifest["config"] = self.cfg.snapshot()
        manifest["config_hash"] = sha256_json(manifest["config"])
        manifest["seeds"] = {
            "provider": self.cfg.provider.seed,
            "training": self.cfg.training.seed,
            "clustering": self.cfg.clustering.seed,
        }
        dump_json(manifest, self.manifest_path)

    def verify(self, entry: Optional[dict]) -> bool:
        if not entry:
            return False
        for rel, digest in entry.get("artifacts", {}).items():
            p = self.root / rel
            if not p.is_file() or sha256_file(p) != digest:
                return False
        return True

    @contextmanager
    def lock(self):
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / ".lock"
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StageError(f"run directory {self.root} is locked by another process ({path})") from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            path.unlink(missing_ok=True)

    def path(self, rel: str) -> Path:
        return self.root / rel


def _stage_settings(cfg: PipelineConfig, stage: str):
    snap = cfg.snapshot()
    if stage == "ingest":
        corpus_file = cfg.resolve(cfg.corpus.path)
        return {"corpus": snap["corpus"], "corpus_sha256": sha256_file(corpus_file)}
    if stage == "embed":
        return snap["provider"]
    if stage == "compress":
        return snap["training"]
    if stage == "factorize":
        return {"svd_threshold": cfg.svd_threshold}
    if stage == "cluster":
        return {"k_range": snap["k_range"], "clustering": snap["clustering"]}
    if stage == "sample":
        return snap["sample_plan"]
    if stage == "themes":
        a = snap["agentic"]
        templates = _templates(cfg)
        return {**a, "prompts": {k: sha256_json(v) for k, v in sorted(templates.texts.items())}}
    return {}


def _templates(cfg: PipelineConfig) -> PromptTemplates:
    a = cfg.agentic
    return PromptTemplates.load(
        cfg.resolve(a.prompts_dir) if a.prompts_dir else None,
        {k: cfg.resolve(v) for k, v in a.prompt_overrides.items()},
    )


def _fingerprint(cfg, stage, upstream_entry) -> str:
    return sha256_json({
        "stage": stage,
        "settings": _stage_settings(cfg, stage),
        "upstream": upstream_entry.get("artifacts") if upstream_entry else None,
    })


# -- stage bodies: each returns the list of files it wrote (relative) -----

def _do_ingest(run: Run, cfg: PipelineConfig) -> list[str]:
    c = load_corpus(cfg.resolve(cfg.corpus.path), cfg.corpus.format)
    n_raw = len(c)
    if cfg.corpus.tag_variants:
        c = filter_by_tags(c, list(cfg.corpus.tag_variants), cfg.corpus.case_insensitive)
    if cfg.corpus.language:
        c = filter_language(c, cfg.corpus.language)
    c = clean_corpus(c)
    if len(c) == 0:
        raise StageError("ingest: no posts left after filtering and cleaning")
    write_corpus_jsonl(c, run.path("corpus.jsonl"))
    dump_json({
        "source_path": cfg.corpus.path,
        "filters_applied": list(c.filters_applied),
        "n_raw": n_raw,
        "n_posts": len(c),
    }, run.path("corpus.meta.json"))
    log.info("ingest: kept %d of %d posts", len(c), n_raw)
    return ["corpus.jsonl", "corpus.meta.json"]


def _read_corpus(run: Run):
    meta = load_json(run.path("corpus.meta.json"))
    return read_corpus_jsonl(run.path("corpus.jsonl"), meta["source_path"], meta["filters_applied"])


def _do_embed(run: Run, cfg: PipelineConfig) -> list[str]:
    m = embed_corpus(_read_corpus(run), cfg.provider)
    m.save(run.path("embeddings"))
    return ["embeddings.json", "embeddings.bin"]


def _do_compress(run: Run, cfg: PipelineConfig) -> list[str]:
    E = EmbeddingMatrix.load(run.path("embeddings")).rows.astype(np.float64)
    report, models = ae.train(E, cfg.training)
    files = []
    for ratio, params in models.items():
        d = f"autoencoder/{_ratio_dir(ratio)}"
        params.save(run.path(d))
        files += [f"{d}/{p.name}" for p in sorted(run.path(d).iterdir())]
    dump_json(report.to_dict(), run.path("autoencoder/report.json"))
    # encode with the float32 parameters as stored, so reruns from disk agree
    best = ae.AutoencoderParams.load(run.path(f"autoencoder/{_ratio_dir(report.selected_ratio)}"))
    Z = ae.encode(best, E)
    save_matrix(Z, run.path("compressed"), ratio=str(report.selected_ratio))
    log.info("compress: selected ratio %s (val loss %.4g)", report.selected_ratio, report.best_val_loss)
    return files + ["autoencoder/report.json", "compressed.json", "compressed.bin"]


def _do_factorize(run: Run, cfg: PipelineConfig) -> list[str]:
    run.path("svd").mkdir(exist_ok=True)
    Z, _ = load_matrix(run.path("compressed"))
    E, _ = load_matrix(run.path("embeddings"))
    summary = {"threshold": cfg.svd_threshold, "arms": {}}
    files = []
    for arm, X in (("with_ae", Z), ("without_ae", E)):
        f = full_svd(X.astype(np.float64))
        ratios = explained_variance(f.S)
        r = select_rank(ratios, cfg.svd_threshold)
        t = f.truncate(r)
        save_matrix(t.U, run.path(f"svd/{arm}_U"), rank=r)
        save_matrix(t.V, run.path(f"svd/{arm}_V"), rank=r)
        summary["arms"][arm] = {
            "rank": r,
            "input_dim": int(X.shape[1]),
            "singular_values": [float(s) for s in f.S],
            "cumulative_explained_variance": [float(v) for v in ratios],
        }
        files += [f"svd/{arm}_{m}.{ext}" for m in ("U", "V") for ext in ("json", "bin")]
        log.info("factorize[%s]: rank %d of %d", arm, r, f.rank)
    dump_json(summary, run.path("svd/summary.json"))
    return files + ["svd/summary.json"]


def _do_cluster(run: Run, cfg: PipelineConfig) -> list[str]:
    run.path("clusters").mkdir(exist_ok=True)
    c = _read_corpus(run)
    cl = cfg.clustering
    U = {arm: load_matrix(run.path(f"svd/{arm}_U"))[0].astype(np.float64) for arm in ARMS}
    n = U["with_ae"].shape[0]
    k_range = [k for k in cfg.k_range if k <= n]
    if len(k_range) < 3:
        raise StageError(f"cluster: k_range needs three values <= n={n}")
    elbow = elbow_select(U["with_ae"], k_range, seed=cl.seed, n_init=cl.n_init, max_iter=cl.max_iter, tol=cl.tol)
    k = cl.k if cl.k is not None else elbow.k
    if not 2 <= k < n:
        raise StageError(f"cluster: k={k} must satisfy 2 <= k < n")
    models = {"with_ae": elbow.models.get(k) or kmeans(U["with_ae"], k, cl.seed, cl.max_iter, cl.tol, cl.n_init)}
    models["without_ae"] = kmeans(U["without_ae"], k, cl.seed, cl.max_iter, cl.tol, cl.n_init)

    files = []
    quality = {}
    for arm in ARMS:
        q = cluster_quality(U[arm], models[arm].assignments)
        quality[arm] = {**q.summary(), "k": k}
        save_matrix(models[arm].centroids, run.path(f"clusters/{arm}_centroids"), **models[arm].to_dict())
        files += [f"clusters/{arm}_centroids.json", f"clusters/{arm}_centroids.bin"]
        if arm == "with_ae":
            save_matrix(q.per_point_silhouette[:, None], run.path("clusters/silhouette"))
            files += ["clusters/silhouette.json", "clusters/silhouette.bin"]
    for q in quality.values():
        if q["ch_index"] == float("inf"):
            q["ch_index"] = "inf"
    dump_json({
        "k": k, "elbow_k": elbow.k, "degenerate": elbow.degenerate,
        "k_range": elbow.k_range, "inertias": elbow.inertias,
    }, run.path("clusters/elbow.json"))
    dump_json(quality, run.path("clusters/quality.json"))
    for arm in ARMS:
        with run.path(f"clusters/{arm}_assignments.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["post_id", "cluster"])
            for pid, lab in zip(c.ids, models[arm].assignments):
                w.writerow([pid, int(lab)])
    files += ["clusters/elbow.json", "clusters/quality.json",
              "clusters/with_ae_assignments.csv", "clusters/without_ae_assignments.csv"]
    log.info("cluster: k=%d (elbow %d)", k, elbow.k)
    return files


def _read_assignments(path: Path) -> np.ndarray:
    with path.open(encoding="utf-8", newline="") as fh:
        return np.array([int(r["cluster"]) for r in csv.DictReader(fh)], dtype=np.int64)


def _do_sample(run: Run, cfg: PipelineConfig) -> list[str]:
    run.path("samples").mkdir(exist_ok=True)
    c = _read_corpus(run)
    labels = _read_assignments(run.path("clusters/with_ae_assignments.csv"))
    sil = load_matrix(run.path("clusters/silhouette"))[0][:, 0].astype(np.float64)
    U = load_matrix(run.path("svd/with_ae_U"))[0]
    files = []
    for cid in sorted(set(int(x) for x in labels)):
        s = select_representatives(cid, labels, U, c, cfg.sample_plan, silhouettes=sil)
        rel = f"samples/cluster_{cid}.json"
        dump_json(s.to_dict(), run.path(rel))
        files.append(rel)
    return files


def _load_samples(run: Run) -> list[RepresentativeSample]:
    paths = sorted(run.path("samples").glob("cluster_*.json"), key=lambda p: int(p.stem.split("_")[1]))
    return [RepresentativeSample.from_dict(load_json(p)) for p in paths]


def _do_themes(run: Run, cfg: PipelineConfig) -> list[str]:
    run.path("transcripts").mkdir(exist_ok=True)
    a = cfg.agentic
    samples = _load_samples(run)
    summary = run_all_clusters(
        samples, a.llm1, a.llm2, a.Q, a.max_iterations,
        max_workers=a.max_workers, min_interval=a.min_interval,
        extractor=a.extractor, templates=_templates(cfg),
    )
    files = []
    for t in summary.transcripts:
        rel = f"transcripts/cluster_{t.cluster_id}.json"
        dump_json(t.to_dict(), run.path(rel))
        files.append(rel)
    failures = {str(k): v for k, v in summary.failures.items()}
    dump_json({"usage": summary.usage, "failures": failures,
               "clusters": [s.cluster_id for s in samples]}, run.path("transcripts/summary.json"))
    if failures:
        msg = f"themes: {len(failures)} cluster(s) failed: " + "; ".join(f"{k}: {v}" for k, v in failures.items())
        if any(isinstance(e, ExternalServiceError) or isinstance(getattr(e, "cause", None), ExternalServiceError)
               for e in summary.errors.values()):
            raise ExternalServiceError(msg)
        raise StageError(msg)
    return files + ["transcripts/summary.json"]


def _do_report(run: Run, cfg: PipelineConfig) -> list[str]:
    out = run.path("report")
    if out.exists():
        shutil.rmtree(out)
    samples = _load_samples(run)
    cluster_ids = [s.cluster_id for s in samples]
    transcripts = []
    for cid in cluster_ids:
        p = run.path(f"transcripts/cluster_{cid}.json")
        if p.is_file():
            transcripts.append(RefinementTranscript.from_dict(load_json(p)))
    quality = load_json(run.path("clusters/quality.json"))
    qa = {arm: {k: (float("inf") if v == "inf" else v) for k, v in quality[arm].items() if k != "k"}
          for arm in ARMS}
    table = metrics_table(qa["with_ae"], qa["without_ae"], label=cfg.provider.name)

    ae_report = load_json(run.path("autoencoder/report.json"))
    loss_rows = [(ratio, epoch + 1, tr, va)
                 for ratio, c in sorted(ae_report["curves"].items(), key=lambda kv: Fraction(kv[0]), reverse=True)
                 for epoch, (tr, va) in enumerate(zip(c["train"], c["val"]))]
    svd_summary = load_json(run.path("svd/summary.json"))
    var_rows = [(arm, i + 1, s, v)
                for arm in ARMS
                for i, (s, v) in enumerate(zip(svd_summary["arms"][arm]["singular_values"],
                                                svd_summary["arms"][arm]["cumulative_explained_variance"]))]
    elbow = load_json(run.path("clusters/elbow.json"))
    curves = {
        "autoencoder_loss": (("ratio", "epoch", "train_loss", "val_loss"), loss_rows),
        "explained_variance": (("arm", "component", "singular_value", "cumulative_ratio"), var_rows),
        "elbow": (("k", "inertia"), list(zip(elbow["k_range"], elbow["inertias"]))),
    }
    manifest = run.load_manifest()
    write_report(out, manifest, transcripts, {s.cluster_id: s.texts for s in samples}, cluster_ids, [table], curves)
    return sorted(str(p.relative_to(run.root)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")


STAGE_FUNCS: dict[str, Callable] = {
    "ingest": _do_ingest, "embed": _do_embed, "compress": _do_compress, "factorize": _do_factorize,
    "cluster": _do_cluster, "sample": _do_sample, "themes": _do_themes, "report": _do_report,
}


def _run_stage(run: Run, stage: str, force: bool) -> StageResult:
    cfg = run.cfg
    manifest = run.load_manifest()
    stages = manifest.setdefault("stages", {})
    up = UPSTREAM[stage]
    up_entry = stages.get(up) if up else None
    if up is not None and not (run.verify(up_entry) and up_entry.get("fingerprint") == _fingerprint(
            cfg, up, stages.get(UPSTREAM[up]) if UPSTREAM[up] else None)):
        raise MissingArtifact(up, f"run stage {up!r} before {stage!r}")

    fp = _fingerprint(cfg, stage, up_entry)
    entry = stages.get(stage)
    if not force and entry and entry.get("fingerprint") == fp and run.verify(entry):
        log.info("stage %s: artifacts up to date, skipping", stage)
        return StageResult(stage, True, entry["artifacts"])

    started = _now()
    stages.pop(stage, None)
    run.save_manifest(manifest)
    try:
        files = STAGE_FUNCS[stage](run, cfg)
    except BeyondWordsError:
        raise
    except (ValueError, OSError, KeyError) as exc:
        raise StageError(f"{stage}: {type(exc).__name__}: {exc}") from exc
    artifacts = {rel: sha256_file(run.path(rel)) for rel in sorted(set(files))}
    manifest = run.load_manifest()
    manifest.setdefault("stages", {})[stage] = {
        "fingerprint": fp, "artifacts": artifacts, "started_at": started, "finished_at": _now(),
    }
    run.save_manifest(manifest)
    if stage == "report":
        dump_json(manifest, run.path("report/manifest.json"))
    return StageResult(stage, False, artifacts)


def stage_run(stage: str, cfg: PipelineConfig, force: bool = False) -> StageResult:
    """Run one stage; skipped (with a log notice) when its artifacts are current."""
    if stage not in STAGE_FUNCS:
        raise StageError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    run = Run(cfg)
    with run.lock():
        return _run_stage(run, stage, force)


def run_all(cfg: PipelineConfig, force: bool = False) -> Path:
    """Run every stage in order; the first failure propagates with its stage name."""
    run = Run(cfg)
    with run.lock():
        for stage in STAGES:
            try:
                _run_stage(run, stage, force)
            except BeyondWordsError as exc:
                exc.failed_stage = stage
                log.error("stage %s failed: %s (partial artifacts in %s)", stage, exc, run.root)
                raise
    return run.root
