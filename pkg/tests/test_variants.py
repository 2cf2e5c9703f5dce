import numpy as np
import pytest

from knnlab import (CorruptionSpec, Dataset, DistributedIndex, RngHandle,
                    SearchIndex, brute_force_knn, classify_batch,
                    distributed_classify_batch, distributed_eta_hat,
                    distributed_eta_hat_batch, effective_k, eta_hat_batch,
                    make_partition, pre1nn_classify, pre1nn_classify_batch,
                    preprocess, train_noise_injected)


def random_dataset(seed, n, d):
    gen = np.random.default_rng(seed)
    return Dataset(gen.random((n, d)), gen.integers(0, 2, n).astype(np.int8)), gen


class TestPreprocess:
    def test_matches_naive_loop(self):
        ds, gen = random_dataset(0, 40, 3)
        for k in (1, 5, 11):
            rel = preprocess(ds, k)
            for i in range(ds.n):
                ns = brute_force_knn(ds, ds.features[i], k, exclude=i)
                vote = int(ds.labels[ns.indices].sum())
                assert rel.relabels[i] == (1 if 2 * vote > k else 0), (i, k)

    def test_handles_duplicate_points(self):
        # duplicates make the self-exclusion path ambiguous for the kd-tree
        X = np.zeros((6, 2))
        X[3:] = 1.0
        ds = Dataset(X, np.array([1, 1, 0, 0, 0, 1]))
        rel = preprocess(ds, 2)
        for i in range(6):
            ns = brute_force_knn(ds, ds.features[i], 2, exclude=i)
            vote = int(ds.labels[ns.indices].sum())
            assert rel.relabels[i] == (1 if 2 * vote > 2 else 0)

    def test_k_bounds(self):
        ds, _ = random_dataset(1, 10, 2)
        with pytest.raises(ValueError):
            preprocess(ds, 0)
        with pytest.raises(ValueError):
            preprocess(ds, 10)  # leave-self-out caps k at n-1

    def test_classify_uses_relabels(self):
        ds, gen = random_dataset(2, 30, 2)
        rel = preprocess(ds, 5)
        X = gen.random((15, 2))
        batch = pre1nn_classify_batch(rel, X)
        for j, x in enumerate(X):
            i = brute_force_knn(ds, x, 1).indices[0]
            assert batch[j] == rel.relabels[i] == pre1nn_classify(rel, x)


class TestPartition:
    def test_sizes_balanced(self):
        part = make_partition(103, 5, RngHandle(0))
        sizes = sorted(np.bincount(part.assignment, minlength=5))
        assert sizes == [20, 20, 21, 21, 21]

    def test_every_point_assigned_once(self):
        part = make_partition(50, 7, RngHandle(1))
        assert sorted(np.concatenate([part.shard_indices(i) for i in range(7)]).tolist()) \
            == list(range(50))

    def test_bad_s(self):
        with pytest.raises(ValueError):
            make_partition(5, 6, RngHandle(0))
        with pytest.raises(ValueError):
            make_partition(5, 0, RngHandle(0))


class TestDistributed:
    def test_s1_bit_exact_with_knn(self):
        ds, gen = random_dataset(3, 200, 3)
        part = make_partition(ds.n, 1, RngHandle(2))
        dindex = DistributedIndex(ds, part)
        X = gen.random((50, 3))
        for k in (1, 7, 64):
            a = distributed_eta_hat_batch(dindex, X, k)
            b = eta_hat_batch(SearchIndex(ds), X, k)
            assert np.array_equal(a, b)

    def test_mean_of_shard_means(self):
        ds, gen = random_dataset(4, 60, 2)
        part = make_partition(ds.n, 4, RngHandle(3))
        x = gen.random(2)
        k = 8  # 2 per shard
        per_shard = []
        for i in range(4):
            ids = part.shard_indices(i)
            sub = Dataset(ds.features[ids], ds.labels[ids])
            ns = brute_force_knn(sub, x, 2)
            per_shard.append(sub.labels[ns.indices].mean())
        want = float(np.mean(per_shard))
        assert distributed_eta_hat(ds, part, x, k) == pytest.approx(want, abs=1e-12)

    def test_effective_k(self):
        assert effective_k(64, 4) == 64
        assert effective_k(10, 4) == 8
        assert effective_k(3, 4) == 0

    def test_k_smaller_than_s_rejected(self):
        ds, gen = random_dataset(5, 40, 2)
        dindex = DistributedIndex(ds, make_partition(ds.n, 8, RngHandle(4)))
        with pytest.raises(ValueError):
            distributed_eta_hat_batch(dindex, gen.random((3, 2)), 4)

    def test_classify_threshold(self):
        ds, gen = random_dataset(6, 100, 2)
        dindex = DistributedIndex(ds, make_partition(ds.n, 2, RngHandle(5)))
        X = gen.random((20, 2))
        pred = distributed_classify_batch(dindex, X, 10)
        vals = distributed_eta_hat_batch(dindex, X, 10)
        assert np.array_equal(pred, vals > 0.5)


class TestNoiseInjectedTrainer:
    def test_omega_zero_is_identity(self):
        ds, _ = random_dataset(7, 30, 2)
        index, noisy = train_noise_injected(ds, CorruptionSpec(0.0), RngHandle(6))
        assert noisy is ds

    def test_perturbs_features_only(self):
        ds, _ = random_dataset(8, 30, 2)
        index, noisy = train_noise_injected(ds, CorruptionSpec(0.05), RngHandle(7))
        assert np.array_equal(noisy.labels, ds.labels)
        assert np.allclose(np.linalg.norm(noisy.features - ds.features, axis=1), 0.05)
        assert index.dataset is noisy
