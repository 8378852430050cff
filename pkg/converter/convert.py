#!/usr/bin/env python3
"""Convert published graph benchmark archives into the portable dataset
directory format consumed by the gca tools.

Two source schemas are recognized:

- ``.npz`` bundles storing a CSR adjacency (``adj_data``/``adj_indices``/
  ``adj_indptr``/``adj_shape``), node attributes (dense ``attr_matrix`` or a
  CSR ``attr_*`` triple), and integer ``labels``.
- the Wiki-CS ``.json`` distribution (``features``, ``labels``, ``links``,
  plus the published ``train_masks``/``val_masks``/``test_mask``, which are
  preserved into ``splits.json``).

Edges are normalized to self-loop-free undirected pairs; the script logs
how many loops and duplicate or reverse arcs were folded away. Re-running
the conversion produces byte-identical output.

Usage: convert.py <source> <outdir>
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse

from gca.graph import Split, from_edges, load_dataset, save_dataset


class ConvertError(ValueError):
    """Unrecognized schema or counts that disagree with the archive."""


def _canonical_pairs(src, dst, n: int):
    """Unique undirected pairs (u < v) minus self-loops, with fold stats."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise ConvertError(f"edge endpoint outside [0, {n})")
    loops = src == dst
    lo = np.minimum(src[~loops], dst[~loops])
    hi = np.maximum(src[~loops], dst[~loops])
    keys = np.unique(lo * n + hi)
    pairs = np.stack([keys // n, keys % n], axis=1)
    folded = int(lo.size - keys.size)
    return pairs, int(loops.sum()), folded


def _load_npz(path: Path):
    with np.load(path, allow_pickle=False) as z:
        keys = set(z.keys())
        adj_keys = {"adj_data", "adj_indices", "adj_indptr", "adj_shape"}
        if not adj_keys <= keys:
            raise ConvertError(
                f"npz archive lacks adjacency arrays: {sorted(adj_keys - keys)}"
            )
        shape = tuple(int(s) for s in z["adj_shape"])
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ConvertError(f"adjacency must be square, got shape {shape}")
        adj = scipy.sparse.csr_matrix(
            (z["adj_data"], z["adj_indices"], z["adj_indptr"]), shape=shape
        )
        n = shape[0]

        if "attr_matrix" in keys:
            features = np.asarray(z["attr_matrix"], dtype=np.float32)
        elif {"attr_data", "attr_indices", "attr_indptr", "attr_shape"} <= keys:
            features = (
                scipy.sparse.csr_matrix(
                    (z["attr_data"], z["attr_indices"], z["attr_indptr"]),
                    shape=tuple(int(s) for s in z["attr_shape"]),
                )
                .toarray()
                .astype(np.float32)
            )
        else:
            raise ConvertError(
                "npz archive lacks attributes (attr_matrix or attr_data/"
                "attr_indices/attr_indptr/attr_shape)"
            )
        if features.shape[0] != n:
            raise ConvertError(
                f"adjacency covers {n} nodes but attributes cover "
                f"{features.shape[0]}"
            )

        if "labels" not in keys:
            raise ConvertError("npz archive lacks labels")
        labels = np.asarray(z["labels"], dtype=np.int64)
        if labels.shape != (n,):
            raise ConvertError(
                f"expected {n} labels, archive holds {labels.shape}"
            )
        num_classes = int(labels.max()) + 1
        if "class_names" in keys:
            try:
                num_classes = max(num_classes, len(z["class_names"]))
            except ValueError:
                pass  # object-dtype names need pickle; labels already fix C

    coo = adj.tocoo()
    return coo.row, coo.col, features, labels, num_classes, None


def _masks_to_splits(blob: dict, n: int) -> list[Split]:
    test_idx = np.flatnonzero(np.asarray(blob["test_mask"], dtype=bool))
    splits = []
    for train_mask, val_mask in zip(blob["train_masks"], blob["val_masks"]):
        s = Split(
            train_idx=np.flatnonzero(np.asarray(train_mask, dtype=bool)),
            val_idx=np.flatnonzero(np.asarray(val_mask, dtype=bool)),
            test_idx=test_idx,
        )
        s.validate(n)
        splits.append(s)
    return splits


def _load_wikics(path: Path):
    blob = json.loads(path.read_text())
    required = {"features", "labels", "links"}
    missing = required - set(blob)
    if missing:
        raise ConvertError(f"Wiki-CS JSON lacks keys: {sorted(missing)}")
    features = np.asarray(blob["features"], dtype=np.float32)
    labels = np.asarray(blob["labels"], dtype=np.int64)
    links = blob["links"]
    n = features.shape[0]
    if labels.shape != (n,):
        raise ConvertError(f"expected {n} labels, JSON holds {labels.shape}")
    if len(links) != n:
        raise ConvertError(f"expected {n} adjacency lists, JSON holds {len(links)}")

    src = np.concatenate([np.full(len(nbrs), i) for i, nbrs in enumerate(links)])
    dst = np.concatenate([np.asarray(nbrs, dtype=np.int64) for nbrs in links])

    splits = None
    if {"train_masks", "val_masks", "test_mask"} <= set(blob):
        splits = _masks_to_splits(blob, n)
    if "stopping_masks" in blob:
        print("note: stopping_masks ignored (no early-stopping slot in the output format)")
    return src, dst, features, labels, int(labels.max()) + 1, splits


def convert(source: str, outdir: str) -> dict:
    """Convert one archive; returns the count report. Raises ConvertError
    when the schema is unrecognized or the written output disagrees with
    the archive."""
    path = Path(source)
    if not path.is_file():
        raise ConvertError(f"source file not found: {path}")
    if path.suffix == ".npz":
        src, dst, features, labels, num_classes, splits = _load_npz(path)
    elif path.suffix == ".json":
        src, dst, features, labels, num_classes, splits = _load_wikics(path)
    else:
        raise ConvertError(
            f"unrecognized source type {path.suffix!r} (expected .npz or .json)"
        )

    n = features.shape[0]
    pairs, loops, folded = _canonical_pairs(src, dst, n)
    print(
        f"normalized {len(src)} stored arcs: dropped {loops} self-loops, "
        f"folded {folded} duplicate/reverse arcs, kept {pairs.shape[0]} "
        f"undirected pairs"
    )

    graph = from_edges(n, pairs, features, labels=labels, num_classes=num_classes)
    graph.validate()  # includes the symmetric-storage check
    save_dataset(graph, outdir, splits)

    reloaded, reloaded_splits = load_dataset(outdir)
    checks = [
        ("nodes", reloaded.num_nodes, n),
        ("features", reloaded.num_features, features.shape[1]),
        ("classes", reloaded.num_classes, num_classes),
        ("undirected pairs", reloaded.num_edges, pairs.shape[0]),
        ("splits", len(reloaded_splits or []), len(splits or [])),
    ]
    for name, got, expected in checks:
        if got != expected:
            raise ConvertError(f"output {name} = {got}, archive says {expected}")

    report = {name: expected for name, _, expected in checks}
    print(
        f"wrote {outdir}: N={report['nodes']} F={report['features']} "
        f"C={report['classes']} M={report['undirected pairs']} "
        f"splits={report['splits']}"
    )
    return report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="Convert a benchmark archive (.npz bundle or Wiki-CS "
        ".json) into a portable dataset directory."
    )
    parser.add_argument("source", help="archive file")
    parser.add_argument("outdir", help="output dataset directory")
    args = parser.parse_args(argv)
    try:
        convert(args.source, args.outdir)
    except (ConvertError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
