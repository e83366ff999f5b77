"""Seeded k-means++ / Lloyd clustering and elbow selection of k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

_CHUNK = 4096


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int = 0
    n_iter: int = 0
    history: list = field(default_factory=list)  # inertia after each assignment step

    def to_dict(self) -> dict:
        return {"k": self.k, "inertia": self.inertia, "seed": self.seed, "n_iter": self.n_iter}


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, n x k, computed in row chunks."""
    out = np.empty((X.shape[0], C.shape[0]))
    for s in range(0, X.shape[0], _CHUNK):
        diff = X[s:s + _CHUNK, None, :] - C[None, :, :]
        out[s:s + _CHUNK] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _inertia(X, C, labels) -> float:
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = sq_distances(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a centre already; take an unused index
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        closest = np.minimum(closest, sq_distances(X, X[idx:idx + 1])[:, 0])
    return X[chosen].copy()


def _update_centroids(X, labels, centroids):
    """Cluster means; an empty cluster takes over the point farthest from its centroid."""
    k = centroids.shape[0]
    labels = labels.copy()
    for j in range(k):
        if not np.any(labels == j):
            d = np.einsum("ij,ij->i", X - centroids[labels], X - centroids[labels])
            counts = np.bincount(labels, minlength=k)
            d[counts[labels] <= 1] = -1.0  # never empty another cluster
            p = int(np.argmax(d))
            log.debug("reseeding empty cluster %d with point %d", j, p)
            labels[p] = j
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, X)
    return sums / counts[:, None], labels


def _lloyd(X, init, max_iter, tol):
    centroids = init.copy()
    labels = np.argmin(sq_distances(X, centroids), axis=1)
    history = [_inertia(X, centroids, labels)]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new, labels = _update_centroids(X, labels, centroids)
        shift = float(np.max(np.linalg.norm(new - centroids, axis=1)))
        centroids = new
        history.append(_inertia(X, centroids, labels))
        labels = np.argmin(sq_distances(X, centroids), axis=1)
        history.append(_inertia(X, centroids, labels))
        if shift < tol:
            break
    k = centroids.shape[0]
    if np.bincount(labels, minlength=k).min() == 0:
        centroids, labels = _update_centroids(X, labels, centroids)
    return centroids, labels, _inertia(X, centroids, labels), n_iter, history


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-8,
           n_init: int = 1, init: Optional[np.ndarray] = None) -> ClusterModel:
    """Lloyd's algorithm from k-means++ starts.

    With ``n_init > 1`` the run with the lowest inertia wins (earliest run on
    ties); each start is seeded from ``(seed, run)``. ``init`` skips the
    random start and uses the given centroids.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in 1..{n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")

    if init is not None:
        starts = [np.asarray(init, dtype=np.float64)]
    else:
        starts = [kmeans_plus_plus(X, k, np.random.default_rng([seed, run])) for run in range(max(1, n_init))]
    best = None
    for start in starts:
        result = _lloyd(X, start, max_iter, tol)
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia, n_iter, history = best
    return ClusterModel(k, centroids, labels.astype(np.int64), inertia, seed, n_iter, history)


@dataclass
class ElbowResult:
    k: int
    k_range: list
    inertias: list
    degenerate: bool = False
    models: dict = field(default_factory=dict, repr=False)


def elbow_from_inertias(k_range: Sequence[int], inertias: Sequence[float]) -> tuple[int, bool]:
    """Interior k with the largest second difference of inertia.

    Returns ``(k, degenerate)``; ``degenerate`` is set when every inertia is
    equal, in which case the smallest interior k is returned.
    """
    k_range = list(k_range)
    I = np.asarray(inertias, dtype=np.float64)
    if len(k_range) < 3 or len(k_range) != I.size:
        raise ValueError("need at least three k values with matching inertias")
    if any(b <= a for a, b in zip(k_range, k_range[1:])):
        raise ValueError("k_range must be strictly ascending")
    if np.all(I == I[0]):
        return k_range[1], True
    second = (I[:-2] - I[1:-1]) - (I[1:-1] - I[2:])
    return k_range[1 + int(np.argmax(second))], False


def elbow_select(X, k_range: Sequence[int], seed: int = 0, n_init: int = 10,
                 max_iter: int = 300, tol: float = 1e-8) -> ElbowResult:
    models = {k: kmeans(X, k, seed=seed, max_iter=max_iter, tol=tol, n_init=n_init) for k in k_range}
    inertias = [models[k].inertia for k in k_range]
    k_star, degenerate = elbow_from_inertias(k_range, inertias)
    if degenerate:
        log.warning("all inertias equal; elbow falls back to k=%d", k_star)
    return ElbowResult(k_star, list(k_range), inertias, degenerate, models)
