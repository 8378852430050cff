"""Node centrality measures (degree, eigenvector, PageRank) and the
per-edge importance scores derived from them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gca.graph import Graph

MEASURES = ("degree", "eigenvector", "pagerank")


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class NodeCentrality:
    measure: str
    scores: np.ndarray  # float64, one nonnegative score per node


@dataclass(frozen=True)
class EdgeWeights:
    """Per-arc importance, aligned with the graph's CSR arc order."""

    values: np.ndarray


def degree_centrality(graph: Graph) -> NodeCentrality:
    """Plain degree on undirected graphs, in-degree on directed ones."""
    if graph.directed:
        scores = graph.in_degrees().astype(np.float64)
    else:
        scores = graph.degrees().astype(np.float64)
    return NodeCentrality(measure="degree", scores=scores)


def eigenvector_centrality(
    graph: Graph, tol: float = 1e-10, max_iter: int = 1000
) -> NodeCentrality:
    """Leading-eigenvector scores by power iteration.

    Iterates on (M + I), which shares eigenvectors with M and makes the
    Perron value strictly dominant (bipartite graphs would otherwise
    oscillate). M is the adjacency for undirected graphs; for directed
    ones it is the incoming-edge operator, so a node accumulates the
    scores of the nodes pointing at it. Graphs whose dominant adjacency
    eigenvalue is 0 (e.g. DAGs) have no positive eigenpair and fail.
    """
    if graph.num_arcs == 0:
        raise ValueError("eigenvector centrality needs at least one edge")
    a = graph.adjacency()
    m = a.T.tocsr() if graph.directed else a
    n = graph.num_nodes
    v = np.full(n, 1.0 / np.sqrt(n))
    diff = np.inf
    for _ in range(max_iter):
        w = m @ v + v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise ConvergenceError("power iteration collapsed to zero", np.inf)
        w /= norm
        diff = np.max(np.abs(w - v))
        v = w
        if diff < tol:
            break
    lam = float(v @ (m @ v))  # Rayleigh estimate of the adjacency eigenvalue
    residual = float(np.max(np.abs(m @ v - lam * v)))
    if not (lam > 0.0) or residual >= 1e-6 * lam:
        raise ConvergenceError(
            f"eigenvector centrality did not converge within {max_iter} iterations",
            residual,
        )
    v = np.maximum(v, 0.0)  # clip -0.0 / rounding dust from the Perron vector
    return NodeCentrality(measure="eigenvector", scores=v / np.linalg.norm(v))


def pagerank_centrality(
    graph: Graph, alpha: float = 0.85, tol: float = 1e-10, max_iter: int = 1000
) -> NodeCentrality:
    """Fixed point of sigma = alpha * A D^{-1} sigma + 1.

    D is the out-degree; undirected graphs are processed as two opposing
    arcs per edge. Dangling nodes simply leak rank (no correction term),
    and the +1 keeps every score strictly positive.
    """
    n = graph.num_nodes
    out_deg = graph.degrees().astype(np.float64)
    inv_out = np.divide(1.0, out_deg, out=np.zeros(n), where=out_deg > 0)
    a_t = graph.adjacency().T.tocsr()  # a_t @ x aggregates x[u]/deg(u) over arcs u->v

    sigma = np.ones(n)
    for _ in range(max_iter):
        nxt = alpha * (a_t @ (inv_out * sigma)) + 1.0
        residual = float(np.max(np.abs(nxt - sigma)))
        sigma = nxt
        if residual < tol:
            return NodeCentrality(measure="pagerank", scores=sigma)
    raise ConvergenceError(
        f"pagerank did not converge within {max_iter} iterations", residual
    )


def compute_centrality(graph: Graph, measure: str) -> NodeCentrality:
    if measure == "degree":
        return degree_centrality(graph)
    if measure == "eigenvector":
        return eigenvector_centrality(graph)
    if measure == "pagerank":
        return pagerank_centrality(graph)
    raise ValueError(f"unknown centrality measure: {measure!r}")


def edge_centrality(graph: Graph, nc: NodeCentrality) -> EdgeWeights:
    """Edge importance from endpoint scores.

    Undirected arc (u, v): the mean of the two endpoint scores, so the
    paired reverse arc carries the same value. Directed arc (u, v): the
    score of v, the node the edge points at.
    """
    if nc.scores.shape != (graph.num_nodes,):
        raise ValueError("centrality scores must have one entry per node")
    src, dst = graph.arcs()
    phi = nc.scores
    if graph.directed:
        values = phi[dst]
    else:
        values = 0.5 * (phi[src] + phi[dst])
    return EdgeWeights(values=values.astype(np.float64))
