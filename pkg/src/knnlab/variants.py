"""Derived nearest-neighbor algorithms.

- preprocess / pre1nn: relabel every training point by a leave-self-out
  k-NN vote, then classify new points with 1NN on the relabeled set.
- distributed NN: split the data into s equal shards, take floor(k/s)
  neighbors per shard, and average the shard label means (in-process
  simulation of the s machines).
- noise-injected trainer: build the index over a perturbed copy of the
  training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corruption import CorruptionSpec, inject_noise
from .dataspace import Dataset, as_point
from .neighbors import (SearchIndex, _TIE_RTOL, knn_query,
                        nearest_neighbor_batch)
from .rng import RngHandle


@dataclass
class RelabeledDataset:
    base: Dataset
    relabels: np.ndarray
    k_used: int
    _nn_index: SearchIndex = field(default=None, repr=False)

    def nn_index(self) -> SearchIndex:
        if self._nn_index is None:
            self._nn_index = SearchIndex(self.base)
        return self._nn_index


def preprocess(dataset: Dataset, k) -> RelabeledDataset:
    """Relabel each x_i by the mean label of its k nearest neighbors,
    excluding x_i itself (strict >1/2 vote)."""
    n = dataset.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range [1, {n - 1}]")
    index = SearchIndex(dataset)
    kq = min(n, k + 2)
    dist, idx = index.tree.query(dataset.features, k=kq, workers=-1)
    labels = dataset.labels.astype(np.int64)

    relabels = np.empty(n, dtype=np.int8)
    rows = np.arange(n)
    self_col = idx == rows[:, None]
    ok = self_col.sum(axis=1) == 1
    if kq > k + 1:
        tied = dist[:, k + 1] - dist[:, k] <= _TIE_RTOL * np.maximum(dist[:, k + 1], 1e-300)
        ok &= ~tied
    # fast path: drop the self column, take the first k of the rest
    fast = np.nonzero(ok)[0]
    if fast.size:
        keep = ~self_col[fast]
        neigh = idx[fast][keep].reshape(fast.size, kq - 1)[:, :k]
        votes = labels[neigh].sum(axis=1)
        relabels[fast] = (2 * votes > k).astype(np.int8)
    for i in np.nonzero(~ok)[0]:
        ns = knn_query(index, dataset.features[i], k, exclude=i)
        votes = labels[ns.indices].sum()
        relabels[i] = np.int8(2 * votes > k)
    return RelabeledDataset(dataset, relabels, int(k))


def pre1nn_classify(relabeled: RelabeledDataset, x) -> int:
    """Relabel of the training point nearest to x."""
    x = as_point(x, relabeled.base.dimension)
    j = nearest_neighbor_batch(relabeled.nn_index(), x[None, :])[0]
    return int(relabeled.relabels[j])


def pre1nn_classify_batch(relabeled: RelabeledDataset, X) -> np.ndarray:
    j = nearest_neighbor_batch(relabeled.nn_index(), X)
    return relabeled.relabels[j].astype(np.int8)


# ---------------------------------------------------------------------------
# distributed NN


@dataclass(frozen=True)
class Partition:
    s: int
    assignment: np.ndarray  # dataset index -> shard id

    def shard_indices(self, i) -> np.ndarray:
        return np.nonzero(self.assignment == i)[0]


def make_partition(n, s, rng) -> Partition:
    """Random split into s shards with sizes differing by at most 1."""
    if not 1 <= s <= n:
        raise ValueError(f"s={s} out of range [1, {n}]")
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    perm = gen.permutation(n)
    assignment = np.empty(n, dtype=np.intp)
    # block split of the permutation; first (n mod s) shards get the extra point
    sizes = np.full(s, n // s)
    sizes[: n % s] += 1
    start = 0
    for i, sz in enumerate(sizes):
        assignment[perm[start:start + sz]] = i
        start += sz
    return Partition(s, assignment)


class DistributedIndex:
    """Per-shard sub-indexes over one dataset partition."""

    def __init__(self, dataset: Dataset, partition: Partition):
        self.dataset = dataset
        self.partition = partition
        self.shards = []
        for i in range(partition.s):
            ids = partition.shard_indices(i)
            sub = Dataset(dataset.features[ids], dataset.labels[ids])
            self.shards.append(SearchIndex(sub))

    def min_shard_size(self):
        return min(ix.n for ix in self.shards)


def distributed_eta_hat_batch(dindex: DistributedIndex, X, k) -> np.ndarray:
    """Mean over shards of the per-shard floor(k/s)-NN label means."""
    s = dindex.partition.s
    k_per = k // s
    if k_per < 1:
        raise ValueError(f"k={k} too small for s={s} shards (k/s >= 1 required)")
    if dindex.min_shard_size() < k_per:
        raise ValueError("shard too small for the per-shard neighbor count")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    from .neighbors import eta_hat_batch  # local to avoid cycle at import time
    acc = np.zeros(X.shape[0])
    for shard in dindex.shards:  # fixed order for reproducibility
        acc += eta_hat_batch(shard, X, k_per)
    return acc / s


def distributed_eta_hat(dataset: Dataset, partition: Partition, x, k) -> float:
    x = as_point(x, dataset.dimension)
    dindex = DistributedIndex(dataset, partition)
    return float(distributed_eta_hat_batch(dindex, x[None, :], k)[0])


def effective_k(k, s) -> int:
    """k' = s * floor(k/s), the neighbor count a distributed query actually uses."""
    return s * (k // s)


def distributed_classify_batch(dindex: DistributedIndex, X, k) -> np.ndarray:
    return (distributed_eta_hat_batch(dindex, X, k) > 0.5).astype(np.int8)


# ---------------------------------------------------------------------------
# noise-injected trainer


def train_noise_injected(dataset: Dataset, spec: CorruptionSpec, rng: RngHandle):
    """Index built over a perturbed copy of the training set."""
    if spec.omega == 0.0:
        noisy = dataset
    else:
        noisy = inject_noise(dataset, spec, rng)
    return SearchIndex(noisy), noisy
