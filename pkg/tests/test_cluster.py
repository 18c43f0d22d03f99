from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from gebi.cluster import (
    adjusted_rand_index,
    eigengap_analysis,
    elbow_select_k,
    kmeans,
    median_heuristic_gamma,
    normalized_cut,
    rbf_affinity,
    spectral_clustering,
)


def two_blobs(rng: np.random.Generator, n_per: int = 20, separation: float = 30.0):
    pts = np.vstack(
        [rng.normal(0.0, 1.0, (n_per, 2)), rng.normal((separation, 0.0), 1.0, (n_per, 2))]
    )
    return pts, np.array([0] * n_per + [1] * n_per)


def blobs(rng: np.random.Generator, centers: list[tuple[float, float]], n_per: int = 15):
    pts = np.vstack([rng.normal(c, 0.4, (n_per, 2)) for c in centers])
    truth = np.repeat(np.arange(len(centers)), n_per)
    return pts, truth


def brute_force_min_ncut(w: np.ndarray) -> float:
    n = w.shape[0]
    best = math.inf
    for size in range(1, n // 2 + 1):
        for subset in itertools.combinations(range(n), size):
            labels = np.zeros(n, dtype=int)
            labels[list(subset)] = 1
            best = min(best, normalized_cut(w, labels))
    return best


class TestRbfAffinity:
    def test_identical_points_weight_one(self):
        w = rbf_affinity(np.zeros((4, 2)), gamma=1.0)
        off = w[~np.eye(4, dtype=bool)]
        assert np.allclose(off, 1.0)
        assert np.allclose(np.diag(w), 0.0)

    def test_large_gamma_kills_weights(self):
        x = np.array([[0.0], [1.0], [2.0]])
        w = rbf_affinity(x, gamma=1e6)
        assert w[~np.eye(3, dtype=bool)].max() < 1e-300

    def test_matches_scalar_exp(self):
        x = np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 1.0]])
        w = rbf_affinity(x, gamma=1.0)
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                d2 = ((x[i] - x[j]) ** 2).sum()
                assert abs(w[i, j] - math.exp(-d2)) < 1e-12

    def test_gamma_must_be_positive(self):
        with pytest.raises(ValueError):
            rbf_affinity(np.zeros((2, 2)), gamma=0.0)


class TestKmeans:
    def test_k1_centroid_is_mean(self):
        rng = np.random.default_rng(0)
        x = rng.random((25, 3))
        a = kmeans(x, 1, seed=0)
        assert a.n_clusters == 1
        assert np.all(a.labels == 0)
        assert a.inertia == pytest.approx(((x - x.mean(axis=0)) ** 2).sum())

    def test_two_blobs_any_seed(self):
        rng = np.random.default_rng(1)
        x, truth = two_blobs(rng)
        for seed in range(10):
            a = kmeans(x, 2, seed=seed)
            assert adjusted_rand_index(a.labels, truth) == 1.0

    def test_determinism_bit_for_bit(self):
        rng = np.random.default_rng(2)
        x = rng.random((30, 4))
        a = kmeans(x, 5, seed=42)
        b = kmeans(x, 5, seed=42)
        assert np.array_equal(a.labels, b.labels)
        assert a.inertia == b.inertia

    def test_k_equals_n(self):
        rng = np.random.default_rng(3)
        x = rng.random((6, 2))
        a = kmeans(x, 6, seed=0)
        assert sorted(a.labels.tolist()) == list(range(6))
        assert a.inertia == pytest.approx(0.0)


class TestSpectral:
    def test_separated_blobs_exact_for_20_seeds(self):
        rng = np.random.default_rng(4)
        x, truth = two_blobs(rng, separation=30.0)
        for seed in range(20):
            a = spectral_clustering(x, 2, seed=seed)
            assert adjusted_rand_index(a.labels, truth) == 1.0

    def test_each_point_own_cluster(self):
        rng = np.random.default_rng(5)
        x = rng.random((7, 2)) * 10
        a = spectral_clustering(x, 7, seed=0)
        assert sorted(a.labels.tolist()) == list(range(7))

    def test_isolated_node_named(self):
        # affinities from node 2 underflow to exactly zero at this gamma
        x = np.array([[0.0], [1.0], [1000.0]])
        with pytest.raises(ValueError, match="index 2"):
            spectral_clustering(x, 2, gamma=1.0, seed=0)

    def test_ncut_near_bruteforce_optimum(self):
        rng = np.random.default_rng(6)
        for trial in range(8):
            n = int(rng.integers(6, 13))
            half = n // 2
            x = np.vstack(
                [rng.normal(0, 1, (half, 2)), rng.normal((6, 0), 1, (n - half, 2))]
            )
            gamma = median_heuristic_gamma(x)
            w = rbf_affinity(x, gamma)
            a = spectral_clustering(x, 2, gamma=gamma, seed=0)
            got = normalized_cut(w, a.labels)
            best = brute_force_min_ncut(w)
            assert got <= best * 1.05

    def test_laplacian_eigenvalues_in_zero_two(self):
        rng = np.random.default_rng(7)
        x = rng.random((15, 3))
        res = eigengap_analysis(x, None, 14)
        assert res.eigenvalues.min() >= -1e-10
        assert res.eigenvalues.max() <= 2.0 + 1e-10


class TestElbow:
    def test_four_blobs_selects_four(self):
        rng = np.random.default_rng(8)
        x, _ = blobs(rng, [(0, 0), (10, 0), (0, 10), (10, 10)])
        res = elbow_select_k(x, 2, 8, seed=0)
        assert res.selected_k == 4

    def test_linear_curve_returns_k_min(self, monkeypatch):
        import gebi.cluster as cluster_mod

        class FakeAssignment:
            def __init__(self, inertia):
                self.inertia = inertia

        monkeypatch.setattr(cluster_mod, "kmeans", lambda x, k, seed: FakeAssignment(100.0 - 10.0 * k))
        res = cluster_mod.elbow_select_k(np.zeros((50, 2)), 2, 6, seed=0)
        assert res.selected_k == 2
        assert res.knee_strength == pytest.approx(0.0, abs=1e-12)

    def test_single_blob_weak_knee(self):
        rng = np.random.default_rng(9)
        x = rng.normal(0, 1, (60, 2))
        res = elbow_select_k(x, 2, 6, seed=0)
        rng2 = np.random.default_rng(10)
        x4, _ = blobs(rng2, [(0, 0), (12, 0), (0, 12), (12, 12)])
        sharp = elbow_select_k(x4, 2, 6, seed=0)
        assert res.knee_strength < sharp.knee_strength

    def test_too_few_candidates(self):
        with pytest.raises(ValueError):
            elbow_select_k(np.zeros((30, 2)), 2, 3, seed=0)


class TestEigengap:
    def test_disconnected_cliques_counted(self):
        # three groups of identical points; gamma large enough that
        # inter-group affinities underflow to exactly zero
        x = np.repeat(np.array([[0.0], [50.0], [100.0]]), 5, axis=0)
        res = eigengap_analysis(x, gamma=10.0, max_k=8)
        assert int((np.abs(res.eigenvalues) < 1e-10).sum()) == 3
        assert res.suggested_k == 3

    def test_two_blobs_suggest_two(self):
        rng = np.random.default_rng(11)
        x, _ = two_blobs(rng, n_per=12, separation=10.0)
        res = eigengap_analysis(x, gamma=0.5, max_k=8)
        assert res.suggested_k == 2

    def test_complete_graph_tie_breaks_to_one(self):
        x = np.zeros((6, 2))  # all identical: uniform affinity
        res = eigengap_analysis(x, gamma=1.0, max_k=5)
        nonzero = res.eigenvalues[1:]
        assert np.allclose(nonzero, nonzero[0])
        assert res.suggested_k == 1


class TestAri:
    def test_permutation_invariance(self):
        a = np.array([0, 0, 1, 1, 2, 2])
        b = np.array([2, 2, 0, 0, 1, 1])
        assert adjusted_rand_index(a, b) == 1.0

    def test_disagreement_below_one(self):
        a = np.array([0, 0, 1, 1])
        b = np.array([0, 1, 0, 1])
        assert adjusted_rand_index(a, b) < 1.0
