"""Truncated SVD through the eigendecomposition of the column Gram matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SvdFactors:
    U: np.ndarray  # n x r, orthonormal columns
    S: np.ndarray  # r, non-increasing
    V: np.ndarray  # k x r, orthonormal columns

    @property
    def rank(self) -> int:
        return int(self.S.shape[0])

    def truncate(self, r: int) -> "SvdFactors":
        if not 1 <= r <= self.rank:
            raise ValueError(f"cannot truncate rank-{self.rank} factors to {r}")
        return SvdFactors(self.U[:, :r].copy(), self.S[:r].copy(), self.V[:, :r].copy())

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _complete_columns(U: np.ndarray, missing: np.ndarray) -> None:
    """Fill columns listed in ``missing`` with unit vectors orthogonal to the rest (in place)."""
    n = U.shape[0]
    basis_iter = iter(range(n))
    filled = [j for j in range(U.shape[1]) if j not in set(missing)]
    for j in missing:
        for e in basis_iter:
            v = np.zeros(n)
            v[e] = 1.0
            for _ in range(2):  # two Gram-Schmidt passes for stability
                for c in filled:
                    v -= (U[:, c] @ v) * U[:, c]
            norm = np.linalg.norm(v)
            if norm > 1e-8:
                U[:, j] = v / norm
                filled.append(j)
                break
        else:
            raise RuntimeError("could not complete orthonormal basis")


def truncated_svd(C, r: int) -> SvdFactors:
    """Rank-``r`` SVD of ``C`` (n x k).

    ``V`` comes from the eigenvectors of ``C.T @ C`` (k x k, cheap because k is
    the compressed width), ``S`` from the square roots of its eigenvalues and
    ``U = C V / S``. Each column of ``V`` is signed so that its largest-magnitude
    entry is non-negative. Columns of ``U`` for (numerically) zero singular
    values are completed to an orthonormal set.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2:
        raise ValueError("C must be a matrix")
    n, k = C.shape
    if not 1 <= r <= min(n, k):
        raise ValueError(f"rank {r} out of range 1..{min(n, k)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("C contains non-finite values")

    gram = C.T @ C
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:r]
    V = _fix_signs(evecs[:, order])
    S = np.sqrt(np.clip(evals[order], 0.0, None))

    # one refinement pass: recompute S as column norms of C V
    CV = C @ V
    S = np.linalg.norm(CV, axis=0)
    tiny = S <= max(n, k) * np.finfo(float).eps * (S.max() if S.size else 0.0) * 1e2
    U = np.zeros((n, r))
    good = ~tiny
    U[:, good] = CV[:, good] / S[good]
    S[tiny] = 0.0
    if tiny.any():
        _complete_columns(U, np.flatnonzero(tiny))
    # eigh returns V sorted by eigenvalue; the norm refinement can only swap
    # near-equal neighbours, so re-sort to keep S non-increasing
    resort = np.argsort(-S, kind="stable")
    return SvdFactors(U[:, resort], S[resort], V[:, resort])


def full_svd(C) -> SvdFactors:
    C = np.asarray(C)
    return truncated_svd(C, min(C.shape))


def explained_variance(S) -> np.ndarray:
    """Cumulative share of sum(S^2) captured by the leading values."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 1 or S.size == 0:
        raise ValueError("need a non-empty vector of singular values")
    if np.any(S < 0):
        raise ValueError("singular values must be non-negative")
    energy = S * S
    total = energy.sum()
    if total == 0:
        raise ValueError("all singular values are zero")
    ratios = np.cumsum(energy) / total
    ratios[-1] = 1.0
    return ratios


def select_rank(ratios, threshold: float = 0.90) -> int:
    """Smallest number of components whose cumulative ratio reaches ``threshold``."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    hits = np.flatnonzero(ratios >= threshold)
    return int(hits[0]) + 1 if hits.size else int(ratios.size)
