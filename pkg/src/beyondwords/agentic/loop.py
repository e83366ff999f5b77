"""Generator/grader refinement loop, per cluster and across clusters."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .. import _http
from ..errors import BeyondWordsError
from .clients import ChatClientSpec, Usage, build_client
from .cot import PromptTemplates, evaluate_themes, extract_evaluation, extract_themes
from .structured import Evaluation, ThemeSet

log = logging.getLogger(__name__)

THRESHOLD_MET = "threshold_met"
MAX_ITERATIONS = "max_iterations"


@dataclass
class RefinementTranscript:
    cluster_id: int
    rounds: list = field(default_factory=list)  # [(ThemeSet, Evaluation)]
    terminal_reason: Optional[str] = None
    final: Optional[ThemeSet] = None

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "terminal_reason": self.terminal_reason,
            "rounds": [{"themes": t.to_dict(), "evaluation": e.to_dict()} for t, e in self.rounds],
            "final": self.final.to_dict() if self.final else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RefinementTranscript":
        rounds = [(ThemeSet.from_dict(r["themes"]), Evaluation.from_dict(r["evaluation"])) for r in d["rounds"]]
        final = ThemeSet.from_dict(d["final"]) if d.get("final") else None
        return cls(int(d["cluster_id"]), rounds, d.get("terminal_reason"), final)


class RefinementError(BeyondWordsError):
    """A round failed; ``transcript`` holds the rounds completed before it."""

    def __init__(self, cluster_id: int, cause: Exception, transcript: RefinementTranscript):
        super().__init__(f"cluster {cluster_id}: {cause}")
        self.cause = cause
        self.transcript = transcript


def _sample_texts(sample) -> list[str]:
    texts = getattr(sample, "texts", None)
    return list(texts) if texts is not None else list(sample)


def refine_loop(sample, llm1, llm2, Q: float = 0.8, max_iterations: int = 3, *,
                cluster_id: Optional[int] = None, extractor=None,
                templates: Optional[PromptTemplates] = None) -> RefinementTranscript:
    """Extract, grade, and re-extract with the grader's feedback until the
    score reaches ``Q`` or ``max_iterations`` rounds have run.

    ``llm1``/``llm2`` are client objects (anything with ``complete``) or
    :class:`ChatClientSpec` values, which are turned into fresh clients.
    """
    if not 0.0 <= Q <= 1.0:
        raise ValueError("Q must lie in [0, 1]")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    texts = _sample_texts(sample)
    if not texts:
        raise ValueError("sample is empty")
    if cluster_id is None:
        cluster_id = getattr(sample, "cluster_id", 0)
    llm1 = build_client(llm1) if isinstance(llm1, ChatClientSpec) else llm1
    llm2 = build_client(llm2) if isinstance(llm2, ChatClientSpec) else llm2

    transcript = RefinementTranscript(cluster_id)
    prior, previous = None, None
    for iteration in range(1, max_iterations + 1):
        try:
            themes = extract_themes(texts, llm1, prior, cluster_id=cluster_id, iteration=iteration,
                                    previous=previous, templates=templates)
            raw = evaluate_themes(themes, llm2, texts, prior, templates=templates)
            ev = extract_evaluation(raw, extractor, templates)
        except Exception as exc:
            transcript.final = transcript.rounds[-1][0] if transcript.rounds else None
            raise RefinementError(cluster_id, exc, transcript) from exc
        transcript.rounds.append((themes, ev))
        log.info("cluster %s round %d: score %.2f", cluster_id, iteration, ev.score)
        if ev.score >= Q:
            transcript.terminal_reason = THRESHOLD_MET
            break
        prior, previous = (ev.score, ev.feedback), themes
    else:
        transcript.terminal_reason = MAX_ITERATIONS
    transcript.final = transcript.rounds[-1][0]
    return transcript


@dataclass
class RunSummary:
    transcripts: list  # successful transcripts, in sample order
    failures: dict  # cluster_id -> error message
    usage: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)  # cluster_id -> exception object

    @property
    def ok(self) -> bool:
        return not self.failures


def run_all_clusters(samples: Sequence, llm1, llm2, Q: float = 0.8, max_iterations: int = 3, *,
                     max_workers: int = 1,
                     client_factory: Optional[Callable] = None,
                     min_interval: float = 0.0,
                     extractor: Optional[ChatClientSpec] = None,
                     templates: Optional[PromptTemplates] = None) -> RunSummary:
    """Run :func:`refine_loop` for every cluster sample, isolating failures.

    Each cluster gets its own clients from ``client_factory(spec, cluster_id)``
    (default: :func:`build_client` with a rate limiter shared by all clusters).
    """
    if not samples:
        raise ValueError("no cluster samples given")
    limiter = _http.RateLimiter(min_interval)
    usage = Usage()
    if client_factory is None:
        def client_factory(spec, cluster_id):
            return build_client(spec, limiter=limiter, usage=usage)

    def one(sample):
        cid = getattr(sample, "cluster_id", None)
        try:
            c1 = client_factory(llm1, cid)
            c2 = client_factory(llm2, cid)
            c3 = client_factory(extractor, cid) if extractor is not None else None
            return refine_loop(sample, c1, c2, Q, max_iterations, cluster_id=cid,
                               extractor=c3, templates=templates), None
        except Exception as exc:  # isolate: one cluster must not sink the others
            log.error("cluster %s failed: %s", cid, exc)
            return None, exc

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        results = list(pool.map(one, samples))
    transcripts, failures, errors = [], {}, {}
    for sample, (transcript, err) in zip(samples, results):
        if err is None:
            transcripts.append(transcript)
        else:
            cid = getattr(sample, "cluster_id", None)
            failures[cid] = f"{type(err).__name__}: {err}"
            errors[cid] = err
    return RunSummary(transcripts, failures, usage.to_dict(), errors)
