"""Contrastive objective over two projected views, its exact gradient,
and the estimators used to sanity-check the bound and the triplet view
of the loss.

All cosine similarities are computed on L2-normalized rows with the
normalization inside the differentiated graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossReport:
    """Objective value and its gradients w.r.t. the projected inputs."""

    J: float
    grad_U: np.ndarray
    grad_V: np.ndarray
    tau: float


def _check_inputs(z_u: np.ndarray, z_v: np.ndarray, tau: float) -> None:
    if tau <= 0.0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if z_u.ndim != 2 or z_u.shape != z_v.shape:
        raise ValueError(f"embedding shapes disagree: {z_u.shape} vs {z_v.shape}")
    if z_u.shape[0] < 1:
        raise ValueError("at least one row required")


def _normalize_rows(z: np.ndarray, label: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValueError(f"row {bad[0]} of {label} has zero norm; cosine undefined")
    return z / norms[:, None], norms


def _direction(a: np.ndarray, b: np.ndarray, tau: float):
    """Per-anchor log-ratio losses for anchors in ``a`` against partner
    view ``b``, plus the softmax ratios needed for the gradient.

    Returns (ell, r_ab, r_aa): ell[i] is the anchor i log ratio, r_ab and
    r_aa are exp terms divided by the anchor's full denominator (diagonal
    of r_aa zeroed).
    """
    s_ab = (a @ b.T) / tau
    s_aa = (a @ a.T) / tau
    shift = np.maximum(s_ab.max(axis=1), s_aa.max(axis=1))
    e_ab = np.exp(s_ab - shift[:, None])
    e_aa = np.exp(s_aa - shift[:, None])
    np.fill_diagonal(e_aa, 0.0)
    denom = e_ab.sum(axis=1) + e_aa.sum(axis=1)
    ell = np.diagonal(s_ab) - shift - np.log(denom)
    return ell, e_ab / denom[:, None], e_aa / denom[:, None]


def contrastive_objective(z_u: np.ndarray, z_v: np.ndarray, tau: float) -> LossReport:
    """J = (1/2N) sum_i [ell(u_i, v_i) + ell(v_i, u_i)].

    Each ell is the log ratio of the positive-pair exponential to the sum
    of the positive, the other-view negatives and the same-view
    negatives. Gradients w.r.t. the raw (unnormalized) inputs are exact.
    """
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    _check_inputs(z_u, z_v, tau)
    u, norms_u = _normalize_rows(z_u, "the first view")
    v, norms_v = _normalize_rows(z_v, "the second view")

    n = u.shape[0]
    ell_uv, r_uv, r_uu = _direction(u, v, tau)
    ell_vu, r_vu, r_vv = _direction(v, u, tau)
    j = (ell_uv.sum() + ell_vu.sum()) / (2.0 * n)

    c = 1.0 / (2.0 * n * tau)
    g_uv = -c * (r_uv + r_vu.T)
    g_uv[np.diag_indices(n)] += 2.0 * c
    d_u = g_uv @ v - c * ((r_uu + r_uu.T) @ u)
    d_v = g_uv.T @ u - c * ((r_vv + r_vv.T) @ v)

    # through the row normalization u_i = z_i / |z_i|
    grad_u = (d_u - (d_u * u).sum(axis=1, keepdims=True) * u) / norms_u[:, None]
    grad_v = (d_v - (d_v * v).sum(axis=1, keepdims=True) * v) / norms_v[:, None]
    return LossReport(J=float(j), grad_U=grad_u, grad_V=grad_v, tau=tau)


def pairwise_losses(z_u: np.ndarray, z_v: np.ndarray, tau: float) -> np.ndarray:
    """Per-anchor ell(u_i, v_i) for anchors in the first view."""
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    _check_inputs(z_u, z_v, tau)
    u, _ = _normalize_rows(z_u, "the first view")
    v, _ = _normalize_rows(z_v, "the second view")
    ell, _, _ = _direction(u, v, tau)
    return ell


def infonce_estimate(z_u: np.ndarray, z_v: np.ndarray, tau: float) -> float:
    """Single-direction density-ratio bound estimate:
    (1/N) sum_i log[ e^{theta_ii/tau} / ((1/N) sum_j e^{theta_ij/tau}) ].
    """
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    _check_inputs(z_u, z_v, tau)
    u, _ = _normalize_rows(z_u, "the first view")
    v, _ = _normalize_rows(z_v, "the second view")
    n = u.shape[0]
    s = (u @ v.T) / tau
    shift = s.max(axis=1)
    log_mean = np.log(np.exp(s - shift[:, None]).sum(axis=1)) + shift - np.log(n)
    return float(np.mean(np.diagonal(s) - log_mean))


def _unit_rows(z: np.ndarray, label: str) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        worst = int(np.argmax(np.abs(norms - 1.0)))
        raise ValueError(
            f"row {worst} of {label} is not unit length (norm {norms[worst]:.6g})"
        )
    return z


def triplet_per_anchor(
    z_u: np.ndarray, z_v: np.ndarray, tau: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-anchor triplet-style surrogate next to the per-anchor negated
    log ratio it approximates.

    The surrogate for anchor i is
    4*N*tau + sum_{j != i} [(|u_i-v_i|^2 - |u_i-v_j|^2)
                            + (|u_i-v_i|^2 - |u_i-u_j|^2)],
    with squared distances expanded on the unit sphere.
    """
    _check_inputs(np.asarray(z_u), np.asarray(z_v), tau)
    u = _unit_rows(z_u, "the first view")
    v = _unit_rows(z_v, "the second view")
    n = u.shape[0]
    s_uv = u @ v.T
    s_uu = u @ u.T
    off_uv = s_uv.sum(axis=1) - np.diagonal(s_uv)
    off_uu = s_uu.sum(axis=1) - np.diagonal(s_uu)
    bracket = 2.0 * (off_uv + off_uu) - 4.0 * (n - 1) * np.diagonal(s_uv)
    surrogate = 4.0 * n * tau + bracket
    ell, _, _ = _direction(u, v, tau)
    return surrogate, -ell


def triplet_surrogate(z_u: np.ndarray, z_v: np.ndarray, tau: float) -> float:
    """Mean of the per-anchor surrogate values."""
    surrogate, _ = triplet_per_anchor(z_u, z_v, tau)
    return float(np.mean(surrogate))


def similarity_matrices(
    z_u: np.ndarray, z_v: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cosine similarity matrices (cross-view, first-view, second-view)
    for diagnostic dumps."""
    u, _ = _normalize_rows(np.asarray(z_u, dtype=np.float64), "the first view")
    v, _ = _normalize_rows(np.asarray(z_v, dtype=np.float64), "the second view")
    return u @ v.T, u @ u.T, v @ v.T
