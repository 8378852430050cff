"""Independent verification utilities.

Everything here deliberately avoids the code paths it is used to check:
central finite differences instead of the analytic backward pass, a
literal double-loop loss instead of the vectorized one, Jacobi rotations
instead of power iteration, and a synthetic block-model generator as a
desk-scale dataset stand-in.
"""

from __future__ import annotations

import math

import numpy as np

from gca.graph import Graph, from_edges


def finite_diff(f, point: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f at point, one coordinate at a time."""
    point = np.asarray(point, dtype=np.float64)
    grad = np.zeros_like(point)
    for i in range(point.size):
        step = np.zeros_like(point)
        step.flat[i] = eps
        hi = f(point + step)
        lo = f(point - step)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(f"non-finite function value near coordinate {i}")
        grad.flat[i] = (hi - lo) / (2.0 * eps)
    return grad


def _cosine(a, b) -> float:
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm row in cosine")
    return float(np.dot(a, b)) / (na * nb)


def naive_loss(z_u: np.ndarray, z_v: np.ndarray, tau: float) -> float:
    """Reference objective: literal per-pair loops, no vectorization.

    For each anchor, the denominator collects the positive pair, the
    opposite-view negatives and the same-view negatives; the overall
    value averages both anchor directions over all nodes.
    """
    n = z_u.shape[0]

    def ell(anchors, positives):
        total = 0.0
        for i in range(n):
            pos = math.exp(_cosine(anchors[i], positives[i]) / tau)
            denom = pos
            for k in range(n):
                if k != i:
                    denom += math.exp(_cosine(anchors[i], positives[k]) / tau)
            for k in range(n):
                if k != i:
                    denom += math.exp(_cosine(anchors[i], anchors[k]) / tau)
            total += math.log(pos / denom)
        return total

    return (ell(z_u, z_v) + ell(z_v, z_u)) / (2.0 * n)


def dense_eigen(adjacency: np.ndarray, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Leading eigenpair of a small symmetric matrix via cyclic Jacobi rotations.

    Only meant for N <= 64 oracle duty. The returned vector has unit L2
    norm and its sign is fixed so the entry sum is nonnegative.
    """
    a = np.array(adjacency, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("dense_eigen expects a square symmetric matrix")
    if n > 64:
        raise ValueError("dense_eigen is an oracle for N <= 64 only")
    v = np.eye(n)
    for _ in range(100):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < tol * 1e-2:
                    continue
                theta = 0.5 * math.atan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    lead = int(np.argmax(np.diag(a)))
    vec = v[:, lead]
    if vec.sum() < 0:
        vec = -vec
    return float(a[lead, lead]), vec / np.linalg.norm(vec)


def sbm_generate(
    n_per_block: int,
    blocks: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    feature_noise: float,
    rng: np.random.Generator,
) -> Graph:
    """Stochastic block model with block-indicator features and flip noise.

    Each node's base feature is its one-hot block indicator tiled out to
    feature_dim; every bit is then flipped independently with probability
    feature_noise. Labels are the block ids.
    """
    if not p_in > p_out:
        raise ValueError("sbm_generate requires p_in > p_out")
    n = n_per_block * blocks
    labels = np.repeat(np.arange(blocks), n_per_block)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(prob.size) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    base = np.zeros((n, feature_dim), dtype=np.float32)
    for d in range(feature_dim):
        base[:, d] = (labels == (d % blocks)).astype(np.float32)
    flips = rng.random((n, feature_dim)) < feature_noise
    features = np.where(flips, 1.0 - base, base).astype(np.float32)

    return from_edges(n, edges, features, labels=labels, num_classes=blocks)


def gnp_graph(
    n: int,
    p: float,
    rng: np.random.Generator,
    feature_dim: int = 4,
    binary: bool = True,
    connected: bool = False,
) -> Graph:
    """Erdos-Renyi test graph with random features (test-support helper)."""
    while True:
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < p
        edges = np.stack([iu[keep], ju[keep]], axis=1)
        if binary:
            feats = (rng.random((n, feature_dim)) < 0.5).astype(np.float32)
        else:
            feats = rng.normal(size=(n, feature_dim)).astype(np.float32)
        g = from_edges(n, edges, feats)
        if not connected or _is_connected(g):
            return g


def _is_connected(g: Graph) -> bool:
    if g.num_nodes == 0:
        return True
    seen = np.zeros(g.num_nodes, dtype=bool)
    stack = [0]
    seen[0] = True
    off, col = g.row_offsets, g.col_indices
    while stack:
        u = stack.pop()
        for v in col[off[u] : off[u + 1]]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())
