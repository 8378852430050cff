"""Removal/masking probabilities derived from centrality, and stochastic
sampling of corrupted graph views.

Probabilities are computed once from the original graph; only the
Bernoulli draws happen per view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gca.centrality import EdgeWeights, NodeCentrality, compute_centrality, edge_centrality
from gca.graph import Graph


@dataclass(frozen=True)
class AugmentationPlan:
    """Per-arc removal and per-dimension masking probabilities for one view."""

    edge_drop_probs: np.ndarray     # float64, one entry per stored arc
    feature_mask_probs: np.ndarray  # float64, one entry per feature dimension
    p_e: float
    p_f: float
    p_tau: float
    adaptive_topology: bool
    adaptive_attribute: bool


def _check_budget(budget: float, p_tau: float) -> None:
    if not 0.0 <= budget < 1.0:
        raise ValueError(f"budget must lie in [0, 1), got {budget}")
    if not 0.0 < p_tau < 1.0:
        raise ValueError(f"p_tau must lie in (0, 1), got {p_tau}")


def _normalize(weights: np.ndarray, budget: float, p_tau: float) -> np.ndarray:
    """min((s_max - s) / (s_max - mean s) * budget, p_tau) with s = log w.

    Zero weights are clamped to the smallest positive weight before the
    log; if every weight is zero or they are all equal the scheme is
    undefined and falls back to a uniform min(budget, p_tau).
    """
    w = np.asarray(weights, dtype=np.float64)
    uniform = np.full(w.shape, min(budget, p_tau))
    positive = w[w > 0.0]
    if positive.size == 0:
        return uniform
    s = np.log(np.maximum(w, positive.min()))
    s_max = s.max()
    mu = s.mean()
    if s_max - mu <= 1e-12 * max(1.0, abs(s_max)):
        return uniform
    probs = (s_max - s) / (s_max - mu) * budget
    return np.minimum(probs, p_tau)


def edge_drop_probs(
    graph: Graph, weights: EdgeWeights, p_e: float, p_tau: float
) -> np.ndarray:
    """Per-arc removal probabilities from edge importance.

    On undirected graphs the normalization statistics are taken over the
    distinct undirected edges (not the doubled arcs), then the resulting
    probability is broadcast to both arcs of each pair.
    """
    _check_budget(p_e, p_tau)
    w = np.asarray(weights.values, dtype=np.float64)
    if w.shape != (graph.num_arcs,):
        raise ValueError("edge weights must have one entry per stored arc")
    if graph.directed:
        return _normalize(w, p_e, p_tau)
    src, dst = graph.arcs()
    key = np.minimum(src, dst) * graph.num_nodes + np.maximum(src, dst)
    _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    per_pair = _normalize(w[first], p_e, p_tau)
    return per_pair[inverse]


def feature_weights(graph: Graph, nc: NodeCentrality) -> np.ndarray:
    """Per-dimension importance: centrality-weighted occurrence counts.

    Binary features count occurrences directly; dense features weigh by
    the magnitude of the entry instead.
    """
    if nc.scores.shape != (graph.num_nodes,):
        raise ValueError("centrality scores must have one entry per node")
    x = graph.features.astype(np.float64)
    if not graph.binary_features:
        x = np.abs(x)
    return x.T @ nc.scores


def feature_mask_probs(w_f: np.ndarray, p_f: float, p_tau: float) -> np.ndarray:
    """Per-dimension masking probabilities; same normalization as edges."""
    _check_budget(p_f, p_tau)
    return _normalize(np.asarray(w_f, dtype=np.float64), p_f, p_tau)


def build_plan(
    graph: Graph,
    measure: str,
    p_e: float,
    p_f: float,
    p_tau: float,
    adaptive_topology: bool = True,
    adaptive_attribute: bool = True,
    nc: NodeCentrality | None = None,
) -> AugmentationPlan:
    """Assemble one view's probabilities from the original graph.

    Non-adaptive flags select the uniform ablation scheme: a constant
    min(budget, p_tau) everywhere. ``nc`` lets callers reuse a centrality
    already computed for another plan.
    """
    _check_budget(p_e, p_tau)
    _check_budget(p_f, p_tau)
    if nc is None and (adaptive_topology or adaptive_attribute):
        nc = compute_centrality(graph, measure)
    if adaptive_topology:
        drop = edge_drop_probs(graph, edge_centrality(graph, nc), p_e, p_tau)
    else:
        drop = np.full(graph.num_arcs, min(p_e, p_tau))
    if adaptive_attribute:
        mask = feature_mask_probs(feature_weights(graph, nc), p_f, p_tau)
    else:
        mask = np.full(graph.num_features, min(p_f, p_tau))
    return AugmentationPlan(
        edge_drop_probs=drop,
        feature_mask_probs=mask,
        p_e=p_e,
        p_f=p_f,
        p_tau=p_tau,
        adaptive_topology=adaptive_topology,
        adaptive_attribute=adaptive_attribute,
    )


def sample_view(graph: Graph, plan: AugmentationPlan, rng: np.random.Generator) -> Graph:
    """Draw one corrupted view: edges dropped per arc-pair, one shared
    feature mask applied to every node's features.

    Both arcs of an undirected edge survive or vanish together. The mask
    is a single Bernoulli vector over dimensions (not per node), so a
    masked dimension is zero across the whole view.
    """
    if plan.edge_drop_probs.shape != (graph.num_arcs,):
        raise ValueError("plan edge probabilities do not match the graph")
    if plan.feature_mask_probs.shape != (graph.num_features,):
        raise ValueError("plan feature probabilities do not match the graph")

    src, dst = graph.arcs()
    if graph.directed:
        keep = rng.random(graph.num_arcs) >= plan.edge_drop_probs
    else:
        key = np.minimum(src, dst) * graph.num_nodes + np.maximum(src, dst)
        _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
        keep_pair = rng.random(first.size) >= plan.edge_drop_probs[first]
        keep = keep_pair[inverse]

    kept_src, kept_dst = src[keep], dst[keep]
    offsets = np.zeros(graph.num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(kept_src, minlength=graph.num_nodes), out=offsets[1:])

    mask = (rng.random(graph.num_features) >= plan.feature_mask_probs).astype(np.float32)
    feats = graph.features * mask
    binary = graph.binary_features or bool(np.all((feats == 0) | (feats == 1)))

    # arcs stay lexicographically sorted under filtering, so CSR order is
    # preserved and an identity plan reproduces the input bit for bit
    return Graph(
        num_nodes=graph.num_nodes,
        directed=graph.directed,
        row_offsets=offsets,
        col_indices=kept_dst.astype(np.int64),
        features=feats,
        labels=graph.labels,
        num_classes=graph.num_classes,
        binary_features=binary,
    )
