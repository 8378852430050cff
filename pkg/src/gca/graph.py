"""Graph container (CSR), portable dataset directory format, node splits,
and the self-looped symmetric propagation operator used by the encoder.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class DatasetError(ValueError):
    """An on-disk dataset directory is missing pieces or internally inconsistent."""


@dataclass(frozen=True)
class Graph:
    """Immutable graph: CSR adjacency plus a dense node-feature matrix.

    Undirected graphs store both (u, v) and (v, u) arcs, so the CSR arc
    count is twice the number of undirected edges. Features are float32
    on disk and in memory; linear algebra upcasts to float64.
    """

    num_nodes: int
    directed: bool
    row_offsets: np.ndarray   # int64, shape (N+1,)
    col_indices: np.ndarray   # int64, shape (num_arcs,)
    features: np.ndarray      # float32, shape (N, F)
    labels: np.ndarray | None = None
    num_classes: int | None = None
    binary_features: bool = False

    @property
    def num_arcs(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def num_edges(self) -> int:
        """Undirected pair count for undirected graphs, arc count otherwise."""
        return self.num_arcs // 2 if not self.directed else self.num_arcs

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def arc_sources(self) -> np.ndarray:
        """Source node of every stored arc, aligned with col_indices."""
        return np.repeat(
            np.arange(self.num_nodes, dtype=np.int64), np.diff(self.row_offsets)
        )

    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        return self.arc_sources(), self.col_indices

    def undirected_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once, as (u, v) with u < v."""
        if self.directed:
            raise ValueError("undirected_pairs() requires an undirected graph")
        src, dst = self.arcs()
        keep = src < dst
        return src[keep], dst[keep]

    def degrees(self) -> np.ndarray:
        """Out-degree per node (equals plain degree on undirected graphs)."""
        return np.diff(self.row_offsets)

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.col_indices, minlength=self.num_nodes).astype(np.int64)

    def adjacency(self) -> sp.csr_matrix:
        """0/1 adjacency as scipy CSR (float64), A[u, v] = 1 iff arc u->v."""
        data = np.ones(self.num_arcs, dtype=np.float64)
        return sp.csr_matrix(
            (data, self.col_indices, self.row_offsets),
            shape=(self.num_nodes, self.num_nodes),
        )

    def validate(self) -> None:
        """Check every structural invariant; raise ValueError on violation."""
        n, off, col = self.num_nodes, self.row_offsets, self.col_indices
        if off.shape != (n + 1,) or off[0] != 0 or off[-1] != col.shape[0]:
            raise ValueError("row_offsets must span [0, num_arcs]")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if col.size and (col.min() < 0 or col.max() >= n):
            raise ValueError("col_indices out of range")
        src = self.arc_sources()
        if np.any(src == col):
            raise ValueError("self-loops are not allowed in storage")
        key = src * n + col
        if np.unique(key).size != key.size:
            raise ValueError("duplicate arcs in storage")
        if not self.directed:
            rev = np.sort(col * n + src)
            if not np.array_equal(np.sort(key), rev):
                raise ValueError("undirected graph must store a symmetric arc set")
        if self.features.shape[0] != n:
            raise ValueError("feature row count must equal num_nodes")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        x = self.features
        is_binary = bool(np.all((x == 0) | (x == 1)))
        if self.binary_features != is_binary:
            raise ValueError("binary_features flag disagrees with feature contents")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise ValueError("labels must have one entry per node")
            if self.num_classes is None or (
                self.labels.size and self.labels.max() >= self.num_classes
            ):
                raise ValueError("labels must lie in [0, num_classes)")


@dataclass(frozen=True)
class Split:
    """Disjoint train/validation/test node-id sets."""

    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def validate(self, num_nodes: int) -> None:
        parts = [self.train_idx, self.val_idx, self.test_idx]
        allidx = np.concatenate(parts)
        if np.unique(allidx).size != allidx.size:
            raise ValueError("split parts must be pairwise disjoint")
        if allidx.size and (allidx.min() < 0 or allidx.max() >= num_nodes):
            raise ValueError("split indices out of range")
        if any(p.size == 0 for p in parts):
            raise ValueError("every split part must be nonempty")


@dataclass(frozen=True)
class NormAdjacency:
    """The operator D^{-1/2} (A + I) D^{-1/2}, float64 CSR.

    The vector sqrt(d) of self-looped degrees is a fixed point of the
    operator, which holds for directed input too when d is the row sum.
    """

    matrix: sp.csr_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, other: np.ndarray) -> np.ndarray:
        return self.matrix @ other

    @property
    def T(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()


def _build_csr(
    num_nodes: int, src: np.ndarray, dst: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Sort arcs lexicographically and produce (row_offsets, col_indices)."""
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    counts = np.bincount(src, minlength=num_nodes)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, dst.astype(np.int64)


def from_edges(
    num_nodes: int,
    edges,
    features: np.ndarray,
    directed: bool = False,
    labels=None,
    num_classes: int | None = None,
) -> Graph:
    """Build a validated Graph from an edge list.

    Self-loops and duplicate edges are dropped with a warning; undirected
    input is symmetrized. ``edges`` is any (E, 2) array-like of node ids.
    """
    edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise ValueError("edge endpoint out of range")
    loops = edges[:, 0] == edges[:, 1]
    if np.any(loops):
        warnings.warn(f"dropping {int(loops.sum())} self-loop(s)")
        edges = edges[~loops]
    src, dst = edges[:, 0], edges[:, 1]
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    key = src * num_nodes + dst
    uniq, idx = np.unique(key, return_index=True)
    dropped = key.size - uniq.size
    if dropped:
        # for undirected input each duplicate pair was counted twice above
        warnings.warn(f"dropping {dropped if directed else dropped // 2} duplicate edge(s)")
    src, dst = src[np.sort(idx)], dst[np.sort(idx)]
    offsets, cols = _build_csr(num_nodes, src, dst)

    features = np.ascontiguousarray(features, dtype=np.float32)
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if labels.size else 0
    g = Graph(
        num_nodes=num_nodes,
        directed=directed,
        row_offsets=offsets,
        col_indices=cols,
        features=features,
        labels=labels,
        num_classes=num_classes,
        binary_features=bool(np.all((features == 0) | (features == 1))),
    )
    g.validate()
    return g


# ---------------------------------------------------------------------------
# portable dataset directory
#
#   meta.json      {"num_nodes", "num_edges", "num_features", "num_classes",
#                   "directed"}; num_edges counts edges.tsv lines
#   edges.tsv      "src<TAB>dst", 0-indexed, undirected pairs listed once
#   features.bin   row-major little-endian float32, N x F, no header
#   labels.tsv     optional, one class id per line
#   splits.json    optional, {"splits": [{"train": [...], "val": [...],
#                   "test": [...]}, ...]}
# ---------------------------------------------------------------------------

_META_KEYS = {"num_nodes", "num_edges", "num_features", "num_classes", "directed"}


def load_dataset(path) -> tuple[Graph, list[Split] | None]:
    """Load a portable dataset directory; returns the graph and stored splits.

    Every failure mode carries its own diagnostic: missing file,
    count mismatch against the meta declaration, out-of-range node id,
    or a non-finite feature value.
    """
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise DatasetError(f"missing required file: {meta_path}")
    meta = json.loads(meta_path.read_text())
    missing = _META_KEYS - {"num_classes"} - set(meta)
    if missing:
        raise DatasetError(f"meta.json lacks keys: {sorted(missing)}")
    n = int(meta["num_nodes"])
    declared_edges = int(meta["num_edges"])
    f_dim = int(meta["num_features"])
    directed = bool(meta["directed"])
    num_classes = meta.get("num_classes")
    num_classes = int(num_classes) if num_classes not in (None, 0) else None

    edges_path = root / "edges.tsv"
    if not edges_path.is_file():
        raise DatasetError(f"missing required file: {edges_path}")
    pairs = []
    with edges_path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{edges_path}:{lineno}: expected 'src<TAB>dst'")
            u, v = int(parts[0]), int(parts[1])
            if not (0 <= u < n and 0 <= v < n):
                raise DatasetError(f"{edges_path}:{lineno}: node id out of range [0, {n})")
            pairs.append((u, v))
    if len(pairs) != declared_edges:
        raise DatasetError(
            f"edge count mismatch: meta declares {declared_edges}, "
            f"edges.tsv has {len(pairs)}"
        )

    feat_path = root / "features.bin"
    if not feat_path.is_file():
        raise DatasetError(f"missing required file: {feat_path}")
    raw = np.fromfile(feat_path, dtype="<f4")
    if raw.size != n * f_dim:
        raise DatasetError(
            f"feature count mismatch: expected {n}x{f_dim}={n * f_dim} "
            f"float32 values, file holds {raw.size}"
        )
    features = raw.reshape(n, f_dim)
    if not np.all(np.isfinite(features)):
        bad = int(np.flatnonzero(~np.isfinite(features).ravel())[0])
        raise DatasetError(f"non-finite feature value at flat index {bad}")

    labels = None
    labels_path = root / "labels.tsv"
    if labels_path.is_file():
        labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        if labels.shape != (n,):
            raise DatasetError(
                f"label count mismatch: expected {n}, got {labels.shape[0]}"
            )
        if num_classes is None:
            num_classes = int(labels.max()) + 1
        if labels.min() < 0 or labels.max() >= num_classes:
            raise DatasetError(f"label outside [0, {num_classes})")

    graph = from_edges(
        n, pairs, features, directed=directed, labels=labels, num_classes=num_classes
    )

    splits = None
    splits_path = root / "splits.json"
    if splits_path.is_file():
        blob = json.loads(splits_path.read_text())
        splits = []
        for entry in blob["splits"]:
            s = Split(
                train_idx=np.asarray(entry["train"], dtype=np.int64),
                val_idx=np.asarray(entry["val"], dtype=np.int64),
                test_idx=np.asarray(entry["test"], dtype=np.int64),
            )
            s.validate(n)
            splits.append(s)
    return graph, splits


def save_dataset(graph: Graph, path, splits: list[Split] | None = None) -> None:
    """Write a Graph (and optional splits) as a portable dataset directory."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if graph.directed:
        src, dst = graph.arcs()
    else:
        src, dst = graph.undirected_pairs()
    meta = {
        "num_nodes": graph.num_nodes,
        "num_edges": int(src.size),
        "num_features": graph.num_features,
        "num_classes": graph.num_classes,
        "directed": graph.directed,
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    with (root / "edges.tsv").open("w") as fh:
        for u, v in zip(src.tolist(), dst.tolist()):
            fh.write(f"{u}\t{v}\n")
    np.ascontiguousarray(graph.features, dtype="<f4").tofile(root / "features.bin")
    if graph.labels is not None:
        with (root / "labels.tsv").open("w") as fh:
            for y in graph.labels.tolist():
                fh.write(f"{y}\n")
    if splits is not None:
        blob = {
            "splits": [
                {
                    "train": s.train_idx.tolist(),
                    "val": s.val_idx.tolist(),
                    "test": s.test_idx.tolist(),
                }
                for s in splits
            ]
        }
        (root / "splits.json").write_text(json.dumps(blob) + "\n")


def split_indices(num_nodes: int, seed: int) -> Split:
    """Random 10/10/80 split of {0..num_nodes-1}, determined by seed."""
    if num_nodes < 10:
        raise ValueError("need at least 10 nodes for a 10/10/80 split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_nodes)
    k = num_nodes // 10
    return Split(
        train_idx=np.sort(perm[:k]),
        val_idx=np.sort(perm[k : 2 * k]),
        test_idx=np.sort(perm[2 * k :]),
    )


def random_split(graph: Graph, seed: int) -> Split:
    """10% train / 10% val / 80% test over the graph's nodes."""
    return split_indices(graph.num_nodes, seed)


def normalized_adjacency(graph: Graph) -> NormAdjacency:
    """D^{-1/2} (A + I) D^{-1/2} with D the self-looped (row) degree."""
    n = graph.num_nodes
    a_hat = graph.adjacency() + sp.identity(n, format="csr", dtype=np.float64)
    d_hat = np.asarray(a_hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(d_hat)
    s = sp.diags(inv_sqrt) @ a_hat @ sp.diags(inv_sqrt)
    return NormAdjacency(matrix=s.tocsr())
