"""Linear evaluation of frozen embeddings: multinomial logistic
regression with an L2 penalty, accuracy averaged over repeated splits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from gca.graph import Split, split_indices

DEFAULT_L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)

GRAD_TOL = 1e-6


@dataclass(frozen=True)
class ProbeResult:
    accuracies: np.ndarray  # one test accuracy per run
    l2_values: np.ndarray   # regularization chosen per run
    seeds: np.ndarray       # split seed (or stored-split index) per run

    def __post_init__(self) -> None:
        if not (len(self.accuracies) == len(self.l2_values) == len(self.seeds)):
            raise ValueError("per-run arrays must have equal length")
        if len(self.accuracies) == 0:
            raise ValueError("result must cover at least one run")
        if np.any((self.accuracies < 0.0) | (self.accuracies > 1.0)):
            raise ValueError("accuracies must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def summary(self) -> str:
        return f"{self.mean:.4f} +- {self.std:.4f}"


def _design(embeddings: np.ndarray) -> np.ndarray:
    """Feature rows with a trailing constant-1 bias column."""
    x = np.asarray(embeddings, dtype=np.float64)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _loss_and_grad(
    w: np.ndarray, phi: np.ndarray, onehot: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    logits = phi @ w
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    prob = exp / exp.sum(axis=1, keepdims=True)
    n = phi.shape[0]
    nll = -np.mean(np.log(np.sum(prob * onehot, axis=1)))
    penalty = 0.5 * l2 * np.sum(w[:-1] ** 2)  # bias row unpenalized
    grad = phi.T @ (prob - onehot) / n
    grad[:-1] += l2 * w[:-1]
    return nll + penalty, grad


def fit_logistic(
    embeddings: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    l2: float,
    max_iter: int = 1000,
) -> np.ndarray:
    """Minimize softmax cross-entropy plus (l2/2)|W|^2 (bias excluded) by
    full-batch gradient descent with backtracking line search.

    Returns the (F+1) x C weight matrix, last row the bias. Warns when
    the gradient norm has not reached tolerance within max_iter.
    """
    if l2 < 0.0:
        raise ValueError(f"l2 must be nonnegative, got {l2}")
    labels = np.asarray(labels)
    if np.any(labels[train_idx] < 0):
        raise ValueError("training labels must be present (nonnegative)")
    num_classes = int(labels.max()) + 1
    phi = _design(embeddings)[train_idx]
    onehot = np.eye(num_classes)[labels[train_idx]]
    w = np.zeros((phi.shape[1], num_classes))

    loss, grad = _loss_and_grad(w, phi, onehot, l2)
    grad_norm = np.abs(grad).max()
    for _ in range(max_iter):
        if grad_norm < GRAD_TOL:
            break
        step = 1.0
        sq = np.sum(grad * grad)
        improved = False
        while step > 1e-14:
            cand = w - step * grad
            cand_loss, cand_grad = _loss_and_grad(cand, phi, onehot, l2)
            if cand_loss <= loss - 1e-4 * step * sq:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        w, loss, grad = cand, cand_loss, cand_grad
        grad_norm = np.abs(grad).max()
    if grad_norm >= GRAD_TOL:
        warnings.warn(
            f"logistic probe stopped at gradient norm {grad_norm:.3e} "
            f"after {max_iter} iterations",
            stacklevel=2,
        )
    return w


def predict(w: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    return np.argmax(_design(embeddings) @ w, axis=1)


def _accuracy(w: np.ndarray, embeddings: np.ndarray, labels: np.ndarray, idx) -> float:
    return float(np.mean(predict(w, embeddings[idx]) == labels[idx]))


def evaluate(
    embeddings: np.ndarray,
    labels: np.ndarray,
    n_runs: int = 20,
    split_seed_base: int = 0,
    l2_grid: tuple[float, ...] = DEFAULT_L2_GRID,
    splits: list[Split] | None = None,
    max_iter: int = 1000,
) -> ProbeResult:
    """Per run: fresh 10/10/80 split (or a stored split, cycled), pick
    the penalty from the grid by validation accuracy, report test
    accuracy. Deterministic given split_seed_base."""
    labels = np.asarray(labels)
    n = embeddings.shape[0]
    if n != labels.shape[0]:
        raise ValueError(
            f"embeddings cover {n} nodes but labels cover {labels.shape[0]}"
        )
    if n_runs < 1:
        raise ValueError(f"n_runs must be positive, got {n_runs}")
    accuracies = np.empty(n_runs)
    chosen = np.empty(n_runs)
    seeds = np.empty(n_runs, dtype=np.int64)
    for run in range(n_runs):
        if splits:
            split = splits[run % len(splits)]
            seeds[run] = run % len(splits)
        else:
            seeds[run] = split_seed_base + run
            split = split_indices(n, int(seeds[run]))
        best = None
        for l2 in l2_grid:
            w = fit_logistic(embeddings, labels, split.train_idx, l2, max_iter=max_iter)
            val_acc = _accuracy(w, embeddings, labels, split.val_idx)
            if best is None or val_acc > best[0]:
                best = (val_acc, l2, w)
        _, l2, w = best
        chosen[run] = l2
        accuracies[run] = _accuracy(w, embeddings, labels, split.test_idx)
    return ProbeResult(accuracies=accuracies, l2_values=chosen, seeds=seeds)


def write_probe_tsv(result: ProbeResult, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("run\tseed\tl2\taccuracy\n")
        for run in range(len(result.accuracies)):
            fh.write(
                f"{run}\t{result.seeds[run]}\t{result.l2_values[run]:g}"
                f"\t{result.accuracies[run]:.6f}\n"
            )
        fh.write(f"# mean {result.summary()}\n")
