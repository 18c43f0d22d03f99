"""Spectral clustering and k-means over reduced vectors, with elbow and
eigengap model selection.

Everything is deterministic given (vectors, params, seed). The spectral
path uses the symmetric normalized Laplacian; the default RBF kernel
width comes from the median heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifold import pairwise_distances

KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-sample cluster indices plus the k-means inertia of the fit."""

    labels: np.ndarray  # (n,) int64 in [0, n_clusters)
    n_clusters: int
    inertia: float

    def __post_init__(self) -> None:
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_clusters):
            raise ValueError("label out of range")

    def members(self) -> list[list[int]]:
        """Index lists per cluster; empty clusters are reported as empty lists."""
        return [np.nonzero(self.labels == c)[0].tolist() for c in range(self.n_clusters)]

    def to_dict(self) -> dict:
        return {
            "n_clusters": int(self.n_clusters),
            "labels": [int(v) for v in self.labels],
            "inertia": float(self.inertia),
        }


@dataclass(frozen=True)
class ElbowResult:
    selected_k: int
    ks: list[int]
    inertias: list[float]
    knee_strength: float


@dataclass(frozen=True)
class EigengapResult:
    eigenvalues: np.ndarray  # ascending, length max_k
    suggested_k: int


def rbf_affinity(vectors: np.ndarray, gamma: float) -> np.ndarray:
    """w_ij = exp(-gamma * ||x_i - x_j||^2) with a zeroed diagonal."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    d = pairwise_distances(vectors)
    w = np.exp(-gamma * d * d)
    np.fill_diagonal(w, 0.0)
    return w


def median_heuristic_gamma(vectors: np.ndarray) -> float:
    """1 / (2 * median^2) of the off-diagonal pairwise distances."""
    d = pairwise_distances(vectors)
    n = d.shape[0]
    off = d[~np.eye(n, dtype=bool)]
    med = float(np.median(off)) if off.size else 0.0
    if med <= 0:
        return 1.0
    return 1.0 / (2.0 * med * med)


def _normalized_laplacian(w: np.ndarray) -> np.ndarray:
    deg = w.sum(axis=1)
    isolated = np.nonzero(deg <= 0)[0]
    if isolated.size:
        raise ValueError(f"isolated sample (zero affinity degree): index {int(isolated[0])}")
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(w.shape[0]) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    return (lap + lap.T) / 2.0


def _fix_eigenvector_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for c in range(vecs.shape[1]):
        peak = np.argmax(np.abs(vecs[:, c]))
        if vecs[peak, c] < 0:
            vecs[:, c] = -vecs[:, c]
    return vecs


def kmeans(vectors: np.ndarray, k: int, seed: int) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ initialization.

    Runs to an assignment fixpoint or 300 iterations; an empty cluster is
    re-seeded to the point farthest from its current centroid. Bit-for-bit
    deterministic given the seed.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} invalid for {n} points")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[c] = x[idx]
        closest = np.minimum(closest, np.sum((x - centers[c]) ** 2, axis=1))

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        own = d2[np.arange(n), new_labels]
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(own))
                new_labels[far] = c
                own[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centers[c] = x[labels == c].mean(axis=0)
    inertia = float(np.sum((x - centers[labels]) ** 2))
    return ClusterAssignment(labels=labels, n_clusters=k, inertia=inertia)


def spectral_clustering(
    vectors: np.ndarray, n_clusters: int, gamma: float | None = None, seed: int = 0
) -> ClusterAssignment:
    """Normalized-Laplacian spectral clustering.

    The n_clusters eigenvectors of smallest eigenvalue form rows that are
    length-normalized and then grouped by seeded k-means. Eigenvector signs
    are fixed (largest-magnitude entry positive) for reproducibility.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if n_clusters < 1 or n_clusters > n:
        raise ValueError(f"n_clusters={n_clusters} invalid for {n} points")
    if gamma is None:
        gamma = median_heuristic_gamma(x)
    lap = _normalized_laplacian(rbf_affinity(x, gamma))
    _, vecs = np.linalg.eigh(lap)
    basis = _fix_eigenvector_signs(vecs[:, :n_clusters])
    norms = np.linalg.norm(basis, axis=1, keepdims=True)
    rows = basis / np.where(norms > 0, norms, 1.0)
    return kmeans(rows, n_clusters, seed)


def elbow_select_k(vectors: np.ndarray, k_min: int, k_max: int, seed: int) -> ElbowResult:
    """Pick k at the knee of the k-means inertia curve.

    The knee is the point of maximum perpendicular distance to the chord
    joining the curve's endpoints; ties break toward the smallest k.
    knee_strength is the same distance on the unit-square-normalized curve,
    near zero when the curve has no sharp bend.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if k_min < 2:
        raise ValueError(f"k_min must be >= 2, got {k_min}")
    if k_max >= n:
        raise ValueError(f"k_max={k_max} must be < n={n}")
    ks = list(range(k_min, k_max + 1))
    if len(ks) < 3:
        raise ValueError(f"need at least 3 candidate k values, got {len(ks)}")
    inertias = [kmeans(x, k, seed).inertia for k in ks]

    def chord_distances(px: np.ndarray, py: np.ndarray) -> np.ndarray:
        ax, ay = px[0], py[0]
        bx, by = px[-1], py[-1]
        chord = np.hypot(bx - ax, by - ay)
        if chord == 0:
            return np.zeros_like(px)
        return np.abs((bx - ax) * (ay - py) - (ax - px) * (by - ay)) / chord

    karr = np.array(ks, dtype=np.float64)
    iarr = np.array(inertias)
    selected = ks[int(np.argmax(chord_distances(karr, iarr)))]

    kspan = karr[-1] - karr[0]
    ispan = iarr.max() - iarr.min()
    if ispan > 0:
        strength = float(
            chord_distances((karr - karr[0]) / kspan, (iarr - iarr.min()) / ispan).max()
        )
    else:
        strength = 0.0
    return ElbowResult(selected_k=selected, ks=ks, inertias=inertias, knee_strength=strength)


def eigengap_analysis(vectors: np.ndarray, gamma: float | None, max_k: int) -> EigengapResult:
    """Smallest max_k Laplacian eigenvalues and the cluster count suggested
    by the largest consecutive gap (ties toward the smallest count)."""
    x = np.asarray(vectors, dtype=np.float64)
    n = x.shape[0]
    if max_k < 1 or max_k >= n:
        raise ValueError(f"max_k={max_k} must be in [1, n) for n={n}")
    if gamma is None:
        gamma = median_heuristic_gamma(x)
    lap = _normalized_laplacian(rbf_affinity(x, gamma))
    evals = np.linalg.eigvalsh(lap)[:max_k]
    if max_k == 1:
        return EigengapResult(eigenvalues=evals, suggested_k=1)
    gaps = np.diff(evals)
    return EigengapResult(eigenvalues=evals, suggested_k=int(np.argmax(gaps)) + 1)


def normalized_cut(w: np.ndarray, labels: np.ndarray) -> float:
    """Sum over clusters of cut(C, rest) / vol(C) on affinity w."""
    labels = np.asarray(labels)
    total = 0.0
    for c in np.unique(labels):
        inside = labels == c
        vol = w[inside].sum()
        if vol == 0:
            return np.inf
        total += w[np.ix_(inside, ~inside)].sum() / vol
    return float(total)


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Permutation-invariant clustering agreement in [-1, 1]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    n = a.size
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    contingency = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(contingency, (ia, ib), 1)

    def comb2(x: np.ndarray) -> float:
        return float((x * (x - 1) // 2).sum())

    sum_ij = comb2(contingency)
    sum_a = comb2(contingency.sum(axis=1))
    sum_b = comb2(contingency.sum(axis=0))
    total = n * (n - 1) / 2
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)
