"""Independent reference implementations used to check the library.

Everything here is written with plain Python loops (or the most direct
formula) and shares no code with the package under test.
"""

import itertools
import math

import numpy as np


def jacobi_singular_values(A, tol=1e-15, max_sweeps=100):
    """One-sided Jacobi (Hestenes) SVD; returns singular values, descending."""
    U = np.array(A, dtype=np.float64, copy=True)
    n_cols = U.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n_cols - 1):
            for q in range(p + 1, n_cols):
                alpha = float(U[:, p] @ U[:, p])
                beta = float(U[:, q] @ U[:, q])
                gamma = float(U[:, p] @ U[:, q])
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                up = U[:, p].copy()
                U[:, p] = c * up - s * U[:, q]
                U[:, q] = s * up + c * U[:, q]
        if not rotated:
            break
    sv = [math.sqrt(float(U[:, j] @ U[:, j])) for j in range(n_cols)]
    return np.array(sorted(sv, reverse=True))


def _act(name, x):
    if name == "relu":
        return x if x > 0.0 else 0.0
    return x


def forward_layers(layers, rows):
    """Straight-line dense forward pass, one scalar at a time."""
    out = []
    for row in np.asarray(rows, dtype=np.float64):
        h = [float(v) for v in row]
        for layer in layers:
            W = layer.weight
            nxt = []
            for j in range(W.shape[1]):
                acc = float(layer.bias[j])
                for i in range(W.shape[0]):
                    acc += h[i] * float(W[i, j])
                nxt.append(_act(layer.activation, acc))
            h = nxt
        out.append(h)
    return np.array(out)


def loop_mse(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    total, count = 0.0, 0
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            total += (A[i, j] - B[i, j]) ** 2
            count += 1
    return total / count


def finite_difference_grads(params, E, loss_fn, h=1e-5):
    """Central differences of ``loss_fn(params, E)`` w.r.t. every weight and bias."""
    grads = []
    for layer in params.layers:
        pair = []
        for arr in (layer.weight, layer.bias):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = loss_fn(params, E)
                arr[idx] = old - h
                down = loss_fn(params, E)
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
            pair.append(g)
        grads.append(tuple(pair))
    return grads


def _dist(a, b):
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def _groups(labels):
    out = {}
    for i, lab in enumerate(labels):
        out.setdefault(int(lab), []).append(i)
    return out


def _centroid(X, idx):
    d = len(X[0])
    return [sum(float(X[i][j]) for i in idx) / len(idx) for j in range(d)]


def naive_silhouette(X, labels):
    X = [list(map(float, r)) for r in np.asarray(X)]
    groups = _groups(labels)
    s = []
    for i, lab in enumerate(labels):
        own = groups[int(lab)]
        if len(own) == 1:
            s.append(0.0)
            continue
        a = sum(_dist(X[i], X[j]) for j in own if j != i) / (len(own) - 1)
        b = min(sum(_dist(X[i], X[j]) for j in idx) / len(idx)
                for g, idx in groups.items() if g != int(lab))
        m = max(a, b)
        s.append(0.0 if m == 0 else (b - a) / m)
    return s, sum(s) / len(s)


def naive_ch(X, labels):
    X = [list(map(float, r)) for r in np.asarray(X)]
    n = len(X)
    groups = _groups(labels)
    k = len(groups)
    overall = _centroid(X, range(n))
    B = W = 0.0
    for idx in groups.values():
        c = _centroid(X, idx)
        B += len(idx) * _dist(c, overall) ** 2
        for i in idx:
            W += _dist(X[i], c) ** 2
    if W == 0:
        return math.inf
    return (B / (k - 1)) / (W / (n - k))


def naive_db(X, labels):
    X = [list(map(float, r)) for r in np.asarray(X)]
    groups = _groups(labels)
    keys = sorted(groups)
    cents = {g: _centroid(X, groups[g]) for g in keys}
    sigma = {g: sum(_dist(X[i], cents[g]) for i in groups[g]) / len(groups[g]) for g in keys}
    total = 0.0
    for g in keys:
        total += max((sigma[g] + sigma[h]) / _dist(cents[g], cents[h]) for h in keys if h != g)
    return total / len(keys)


def best_two_partition(X):
    """Exhaustive search over all 2-partitions; returns (labels, inertia)."""
    X = [list(map(float, r)) for r in np.asarray(X)]
    n = len(X)
    best = (None, math.inf)
    for bits in itertools.product((0, 1), repeat=n - 1):
        labels = (0,) + bits
        if len(set(labels)) < 2:
            continue
        inertia = 0.0
        for idx in _groups(labels).values():
            c = _centroid(X, idx)
            inertia += sum(_dist(X[i], c) ** 2 for i in idx)
        if inertia < best[1] - 1e-12:
            best = (labels, inertia)
    return best


def max_relative_error(a, b):
    """max |a-b| / max(|a|, |b|); entries where both are exactly zero count as 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = np.maximum(np.abs(a), np.abs(b))
    err = np.divide(np.abs(a - b), den, out=np.zeros_like(den), where=den > 0)
    return float(err.max()) if err.size else 0.0
