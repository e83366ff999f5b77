"""Cluster validity indices: silhouette, Calinski-Harabasz, Davies-Bouldin."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CELLS = 1 << 24


@dataclass
class ClusterQuality:
    ch_index: float
    db_index: float
    mean_silhouette: float
    per_point_silhouette: np.ndarray

    def summary(self) -> dict:
        return {
            "ch_index": self.ch_index,
            "db_index": self.db_index,
            "silhouette": self.mean_silhouette,
        }


def _prepare(X, assignments):
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(assignments)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise ValueError("assignments must have one label per row of X")
    uniq, inv = np.unique(labels, return_inverse=True)
    return X, inv, uniq.size


def _centroids(X, inv, k):
    counts = np.bincount(inv, minlength=k).astype(np.float64)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, inv, X)
    return sums / counts[:, None], counts


def silhouette(X, assignments) -> tuple[np.ndarray, float]:
    """Per-point silhouette values and their mean (Euclidean distance).

    Points alone in their cluster get 0, as do points with a = b = 0.
    """
    X, inv, k = _prepare(X, assignments)
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")
    n = X.shape[0]
    counts = np.bincount(inv, minlength=k).astype(np.float64)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), inv] = 1.0
    s = np.zeros(n)
    # exact pairwise differences, chunked to bound memory at ~_CELLS floats
    chunk = max(1, _CELLS // max(1, n * X.shape[1]))
    for start in range(0, n, chunk):
        rows = slice(start, start + chunk)
        diff = X[rows, None, :] - X[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        sums = dist @ onehot  # chunk x k: summed distance to each cluster
        own = inv[rows]
        own_size = counts[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[np.arange(len(own)), own] / (own_size - 1)
            mean_other = sums / counts[None, :]
        mean_other[np.arange(len(own)), own] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        chunk_s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
        chunk_s[own_size <= 1] = 0.0
        s[rows] = chunk_s
    return s, float(s.mean())


def ch_index(X, assignments) -> float:
    """Between/within dispersion ratio scaled by (N-k)/(k-1); +inf when within is zero."""
    X, inv, k = _prepare(X, assignments)
    n = X.shape[0]
    if not 2 <= k < n:
        raise ValueError(f"CH index needs 2 <= k < N (k={k}, N={n})")
    cents, counts = _centroids(X, inv, k)
    mean = X.mean(axis=0)
    between = float(np.sum(counts * np.sum((cents - mean) ** 2, axis=1)))
    within = float(np.sum((X - cents[inv]) ** 2))
    if within == 0.0:
        return math.inf
    return between / within * (n - k) / (k - 1)


def db_index(X, assignments) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j)."""
    X, inv, k = _prepare(X, assignments)
    if k < 2:
        raise ValueError("DB index needs at least two clusters")
    cents, _ = _centroids(X, inv, k)
    dist_to_own = np.linalg.norm(X - cents[inv], axis=1)
    scatter = np.bincount(inv, weights=dist_to_own, minlength=k) / np.bincount(inv, minlength=k)
    sep = np.sqrt(np.sum((cents[:, None, :] - cents[None, :, :]) ** 2, axis=2))
    for i in range(k):
        for j in range(i + 1, k):
            if sep[i, j] == 0.0:
                raise ValueError(f"clusters {i} and {j} have coincident centroids")
    ratio = (scatter[:, None] + scatter[None, :]) / np.where(sep > 0, sep, 1.0)
    np.fill_diagonal(ratio, -np.inf)
    return float(np.mean(ratio.max(axis=1)))


def cluster_quality(X, assignments) -> ClusterQuality:
    per_point, mean = silhouette(X, assignments)
    return ClusterQuality(ch_index(X, assignments), db_index(X, assignments), mean, per_point)
