import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from sklearn.metrics import silhouette_samples

from pegspace.clustering import KMeans, kmeans, manova, objective, optimal_k, scatter_matrices, silhouette


def blobs(seed, n_per=60, k=4, dim=8, spread=0.3):
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-10, 10, (k, dim))
    labels = np.repeat(np.arange(k), n_per)
    return centres[labels] + rng.normal(0, spread, (k * n_per, dim)), labels


def brute_silhouette(x, labels):
    n = len(x)
    out = np.zeros(n)
    for i in range(n):
        dist = {}
        for j in range(n):
            if j != i:
                dist.setdefault(labels[j], []).append(np.sqrt(((x[i] - x[j]) ** 2).sum()))
        own = dist.get(labels[i], [])
        if not own:
            continue
        a = sum(own) / len(own)
        b = min(sum(v) / len(v) for c, v in dist.items() if c != labels[i])
        out[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return out


class TestKMeans:
    def test_single_cluster(self):
        x = np.random.default_rng(0).normal(size=(40, 8))
        res = kmeans(x, 1, rng=0)
        assert_allclose(res.centroids[0], x.mean(axis=0), atol=1e-12)
        assert_allclose(res.objective, ((x - x.mean(axis=0)) ** 2).sum(), rtol=1e-12)

    def test_one_cluster_per_point(self):
        x = np.random.default_rng(1).normal(size=(12, 8))
        res = kmeans(x, 12, rng=0)
        assert res.objective == 0
        assert len(np.unique(res.assignments)) == 12

    @pytest.mark.parametrize("seed", range(10))
    def test_separated_pairs(self, seed):
        x = np.array([[0.0], [0.1], [100.0], [100.1]])
        labels = kmeans(x, 2, rng=seed).assignments
        assert labels[0] == labels[1] != labels[2] == labels[3]

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            kmeans(np.ones((3, 2)), 4)

    def test_result_invariants(self):
        x, _ = blobs(3)
        res = kmeans(x, 5, rng=2)
        assert np.all(np.bincount(res.assignments, minlength=5) > 0)
        assert_allclose(res.objective, objective(x, res.assignments, res.centroids), rtol=1e-9)
        assert 0 <= res.replicate_of_best < 5

    @pytest.mark.parametrize("seed", range(50))
    def test_objective_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(int(rng.integers(20, 150)), 8)) * rng.uniform(0.5, 5, 8)
        res = kmeans(x, int(rng.integers(2, 8)), replicates=3, rng=seed)
        for hist in res.history:
            assert len(hist) >= 1
            assert np.all(np.diff(hist) <= 1e-12 * hist[0])

    def test_online_phase_never_worse(self):
        x, _ = blobs(5, spread=4.0)
        for seed in range(5):
            batch = kmeans(x, 6, replicates=1, online=False, rng=seed)
            refined = kmeans(x, 6, replicates=1, online=True, rng=seed)
            assert refined.objective <= batch.objective + 1e-9

    def test_seeded_determinism(self):
        x, _ = blobs(6)
        a, b = kmeans(x, 4, rng=9), kmeans(x, 4, rng=9)
        assert_array_equal(a.assignments, b.assignments)
        assert a.objective == b.objective

    def test_estimator(self):
        x, truth = blobs(7)
        est = KMeans(n_clusters=4, random_state=0).fit(x)
        assert_array_equal(est.predict(x), est.labels_)
        assert len({(t, l) for t, l in zip(truth, est.labels_)}) == 4


class TestSilhouette:
    def test_hand_case(self):
        s, _ = silhouette(np.array([[0.0], [1.0], [10.0], [11.0]]), [0, 0, 1, 1])
        assert_allclose(s[0], (10.5 - 1) / 10.5, rtol=1e-15)
        assert_allclose(s[0], 0.9048, atol=1e-4)

    def test_identical_points_score_one(self):
        x = np.array([[0.0, 0.0]] * 3 + [[50.0, 50.0]] * 2)
        s, _ = silhouette(x, [0, 0, 0, 1, 1])
        assert_array_equal(s, np.ones(5))

    def test_singleton_scores_zero(self):
        s, _ = silhouette(np.array([[0.0], [1.0], [10.0]]), [0, 0, 1])
        assert s[2] == 0.0

    def test_single_cluster_rejected(self):
        with pytest.raises(ValueError):
            silhouette(np.ones((4, 2)), [0, 0, 0, 0])

    @pytest.mark.parametrize("seed", range(20))
    def test_brute_force_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 201))
        x = rng.normal(size=(n, 8))
        labels = rng.integers(0, int(rng.integers(2, 6)), n)
        labels[:2] = [0, 1]
        s, mean = silhouette(x, labels)
        ref = brute_silhouette(x, labels)
        assert_allclose(s, ref, rtol=1e-12, atol=1e-15)
        assert_allclose(mean, ref.mean(), rtol=1e-12)
        assert_allclose(s, silhouette_samples(x, labels), rtol=1e-10, atol=1e-12)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32), st.integers(3, 60), st.integers(2, 5))
    def test_bounded(self, seed, n, k):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, k, n)
        labels[:2] = [0, 1]
        s, mean = silhouette(rng.normal(size=(n, 3)), labels)
        assert np.all((s >= -1) & (s <= 1))


class TestOptimalK:
    def test_four_blobs(self):
        hits = 0
        for seed in range(20):
            x, _ = blobs(seed, n_per=40, spread=0.5)
            best = optimal_k(x, rng=seed)
            hits += best.k == 4
            assert all(-1 <= v <= 1 for v in best.sc_by_k.values())
            assert best.sc == max(best.sc_by_k.values())
        assert hits >= 19

    def test_invalid_range(self):
        x, _ = blobs(0, n_per=2)
        with pytest.raises(ValueError):
            optimal_k(x, range(1, 4))
        with pytest.raises(ValueError):
            optimal_k(x, range(2, 9))

    def test_prefers_unsplit_duplicates(self):
        # k = 3 must split an identical pair, leaving two zero-scored singletons
        x = np.array([[0.0], [0.0], [5.0], [5.0]])
        assert optimal_k(x, range(2, 4), rng=0).k == 2


class TestManova:
    def test_degrees_of_freedom(self):
        x, labels = blobs(0, n_per=30, k=4, dim=8, spread=3.0)
        rep = manova(x, labels)
        assert_array_equal(rep.df, [24, 14, 6])

    @pytest.mark.parametrize("seed", range(20))
    def test_wilks_determinant_ratio(self, seed):
        rng = np.random.default_rng(seed)
        p, g = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        labels = np.repeat(np.arange(g), int(rng.integers(p + 2, 15)))
        x = rng.normal(size=(labels.size, p)) + rng.normal(0, 1, (g, p))[labels]
        rep = manova(x, labels)
        W, B = scatter_matrices(x, labels)
        assert_allclose(rep.wilks[0], np.linalg.det(W) / np.linalg.det(W + B), rtol=1e-10)
        assert np.all(np.diff(rep.wilks) >= -1e-15)
        assert np.all((rep.wilks > 0) & (rep.wilks <= 1))

    def test_two_group_toy(self):
        x = np.array([[1.0, 2.0], [2.0, 1.5], [1.5, 3.0], [4.0, 4.5], [5.0, 4.0], [4.5, 5.5], [3.0, 3.1]])
        labels = np.array([0, 0, 0, 1, 1, 1, 1])
        W, B = scatter_matrices(x, labels)
        rep = manova(x, labels)
        assert_allclose(rep.wilks[0], np.linalg.det(W) / np.linalg.det(W + B), rtol=1e-10)
        assert_array_equal(rep.df, [2])

    def test_identical_means(self):
        block = np.random.default_rng(4).normal(size=(10, 3))
        x = np.vstack([block, block, block])
        rep = manova(x, np.repeat([0, 1, 2], 10))
        assert_allclose(rep.wilks[0], 1.0, atol=1e-12)
        assert_allclose(rep.chi2[0], 0.0, atol=1e-9)
        assert_allclose(rep.p_values[0], 1.0, atol=1e-9)
        assert rep.dimension == 0

    def test_separated_groups_are_distinct(self):
        x, labels = blobs(1, n_per=30, k=4, spread=1.0)
        rep = manova(x, labels)
        assert rep.p_values[0] < 1e-10
        assert rep.dimension == 3

    def test_singular_within_scatter_regularized(self):
        x, labels = blobs(2, n_per=10, k=3, dim=4)
        x = np.column_stack([x, x[:, 0]])
        assert manova(x, labels).regularized

    @pytest.mark.parametrize("labels", [np.zeros(10), np.r_[0, np.ones(9)], np.r_[np.zeros(2), np.ones(3)]])
    def test_preconditions(self, labels):
        x = np.random.default_rng(0).normal(size=(len(labels), 3))
        with pytest.raises(ValueError):
            manova(x, labels)
