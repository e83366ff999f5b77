"""Per-cluster sample sizing (Cochran) and silhouette-ranked representatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .latent.quality import silhouette


def _exact(x) -> Fraction:
    # str() round-trips decimal literals, so 0.1 becomes exactly 1/10
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def cochran_n(z: float, p: float = 0.5, e: float = 0.1) -> int:
    """ceil(z^2 p (1-p) / e^2), evaluated in exact rational arithmetic."""
    if not z > 0:
        raise ValueError("z must be positive")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not 0 < e < 1:
        raise ValueError("e must lie in (0, 1)")
    zf, pf, ef = _exact(z), _exact(p), _exact(e)
    return math.ceil(zf * zf * pf * (1 - pf) / (ef * ef))


@dataclass(frozen=True)
class SamplePlan:
    z: float = 1.64
    p: float = 0.5
    e: float = 0.1
    n_target: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_target", cochran_n(self.z, self.p, self.e))

    def to_dict(self) -> dict:
        return {"z": self.z, "p": self.p, "e": self.e, "n_target": self.n_target}


@dataclass(frozen=True)
class Member:
    post_id: str
    silhouette: float
    clean_text: str = ""


@dataclass
class RepresentativeSample:
    cluster_id: int
    members: list[Member]
    plan: Optional[SamplePlan] = None

    @property
    def texts(self) -> list[str]:
        return [m.clean_text for m in self.members]

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "plan": self.plan.to_dict() if self.plan else None,
            "members": [
                {"post_id": m.post_id, "silhouette": m.silhouette, "clean_text": m.clean_text}
                for m in self.members
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RepresentativeSample":
        plan = None
        if d.get("plan"):
            plan = SamplePlan(d["plan"]["z"], d["plan"]["p"], d["plan"]["e"])
        members = [Member(m["post_id"], float(m["silhouette"]), m.get("clean_text", "")) for m in d["members"]]
        return cls(int(d["cluster_id"]), members, plan)


def select_representatives(cluster_id: int, assignments, X, corpus, plan: SamplePlan,
                           silhouettes: Optional[np.ndarray] = None) -> RepresentativeSample:
    """Top ``plan.n_target`` members of one cluster by silhouette.

    ``corpus`` is a :class:`~beyondwords.corpus.Corpus` or a plain list of
    post ids aligned with ``X``. Ties on silhouette are ordered by post id.
    Pass precomputed ``silhouettes`` to avoid the O(n^2) pass per cluster.
    """
    labels = np.asarray(assignments)
    if len(np.unique(labels)) < 2:
        raise ValueError("representative selection needs at least two clusters")
    if silhouettes is None:
        silhouettes, _ = silhouette(X, labels)
    posts = getattr(corpus, "posts", None)
    ids: Sequence[str] = [p.id for p in posts] if posts is not None else list(corpus)
    texts = [p.clean_text for p in posts] if posts is not None else [""] * len(ids)
    if len(ids) != labels.shape[0]:
        raise ValueError("corpus and assignments differ in length")
    idx = np.flatnonzero(labels == cluster_id)
    if idx.size == 0:
        raise ValueError(f"cluster {cluster_id} is empty")
    ranked = sorted(idx, key=lambda i: (-float(silhouettes[i]), ids[i]))
    chosen = ranked[: plan.n_target]
    members = [Member(ids[i], float(silhouettes[i]), texts[i]) for i in chosen]
    return RepresentativeSample(int(cluster_id), members, plan)
