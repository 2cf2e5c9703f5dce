"""Exact k-nearest-neighbor search and the plug-in classifier.

The spatial index wraps a scipy cKDTree but guarantees the documented tie
rule (equal distances resolved toward the smaller dataset index), so query
results are always identical to a brute-force scan.  Batch entry points are
vectorized; for d=1 a sorted-array window search with label prefix sums
replaces tree queries on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dataspace import Dataset, as_point

_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class NeighborSet:
    indices: np.ndarray  # k dataset indices
    distances: np.ndarray  # sorted ascending, ties by smaller index

    @property
    def k(self):
        return self.indices.size


class SearchIndex:
    """Immutable spatial index over a Dataset; exact under the tie rule."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self._tree = None
        if dataset.dimension == 1:
            order = np.argsort(dataset.features[:, 0], kind="stable")
            self._order = order
            self._sorted = dataset.features[order, 0]
            labels = dataset.labels[order].astype(np.int64)
            self._label_prefix = np.concatenate([[0], np.cumsum(labels)])
        else:
            self._order = None

    @property
    def tree(self) -> cKDTree:
        # built on first use; the d=1 batch path never needs it
        if self._tree is None:
            self._tree = cKDTree(self.dataset.features)
        return self._tree

    @property
    def n(self):
        return self.dataset.n


def brute_force_knn(dataset: Dataset, x, k, exclude=None) -> NeighborSet:
    """O(n d) reference scan; the oracle for index correctness tests."""
    x = as_point(x, dataset.dimension)
    dist = np.sqrt(((dataset.features - x) ** 2).sum(axis=1))
    idx = np.arange(dataset.n)
    if exclude is not None:
        keep = idx != exclude
        dist, idx = dist[keep], idx[keep]
    _check_k(k, idx.size)
    order = np.lexsort((idx, dist))[:k]
    return NeighborSet(idx[order], dist[order])


def _check_k(k, n_avail):
    if not 1 <= k <= n_avail:
        raise ValueError(f"k={k} out of range [1, {n_avail}]")


def knn_query(index: SearchIndex, x, k, exclude=None) -> NeighborSet:
    """The k exactly-nearest points in Euclidean distance (tie rule applied)."""
    ds = index.dataset
    x = as_point(x, ds.dimension)
    n_avail = ds.n - (1 if exclude is not None else 0)
    _check_k(k, n_avail)

    kk = k + (1 if exclude is not None else 0)
    kq = min(ds.n, kk + 1)  # one extra to detect boundary ties
    dist, idx = index.tree.query(x, k=kq)
    dist = np.atleast_1d(dist)
    idx = np.atleast_1d(idx)

    cand = idx
    if kq > kk:
        # possible membership tie at the k-th distance: widen via ball query
        gap_tied = dist[-1] - dist[kk - 1] <= _TIE_RTOL * max(dist[-1], 1e-300)
        internal_tied = np.any(np.diff(dist) <= _TIE_RTOL * np.maximum(dist[1:], 1e-300))
        if gap_tied or internal_tied:
            r = dist[kk - 1] * (1.0 + 10 * _TIE_RTOL) + 1e-300
            cand = np.asarray(index.tree.query_ball_point(x, r), dtype=np.intp)
    if exclude is not None:
        cand = cand[cand != exclude]
    d = np.sqrt(((ds.features[cand] - x) ** 2).sum(axis=1))
    order = np.lexsort((cand, d))[:k]
    return NeighborSet(cand[order], d[order])


def eta_hat(index: SearchIndex, x, k) -> float:
    """Mean label of the k nearest neighbors."""
    ns = knn_query(index, x, k)
    return float(index.dataset.labels[ns.indices].mean())


def classify(index: SearchIndex, x, k) -> int:
    """1 iff the neighbor-label mean strictly exceeds 1/2."""
    return int(eta_hat(index, x, k) > 0.5)


# ---------------------------------------------------------------------------
# batch paths


def _window_starts_1d(sorted_x, queries, k):
    """Left edge of the k-closest window for each query (binary search)."""
    n = sorted_x.size
    lo = np.clip(np.searchsorted(sorted_x, queries) - k, 0, n - k)
    hi = np.clip(np.searchsorted(sorted_x, queries), 0, n - k)
    while np.any(lo < hi):
        active = lo < hi
        mid = (lo + hi) // 2
        move = queries - sorted_x[mid] > sorted_x[np.minimum(mid + k, n - 1)] - queries
        lo = np.where(active & move, mid + 1, lo)
        hi = np.where(active & ~move, mid, hi)
    return lo


def _eta_hat_1d(index: SearchIndex, q, k) -> np.ndarray:
    """Window search + prefix sums, corrected for duplicate runs at the
    window's far edge (the tie rule keeps the run's smallest dataset
    indices, which the stable sort placed at the run's start)."""
    x = index._sorted
    p = index._label_prefix
    s = _window_starts_1d(x, q, k)
    sums = (p[s + k] - p[s]).astype(np.float64)

    dL = np.abs(q - x[s])
    dR = np.abs(x[s + k - 1] - q)
    # the boundary (max-distance) value; membership ties happen in its run
    left_far = dL >= dR
    v = np.where(left_far, x[s], x[s + k - 1])
    a = np.searchsorted(x, v, side="left")
    b = np.searchsorted(x, v, side="right")
    # window positions holding v, vs the run's first that many positions
    w_lo = np.where(left_far, s, np.maximum(a, s))
    w_hi = np.where(left_far, np.minimum(b, s + k), s + k)
    r = w_hi - w_lo
    adjust = r < (b - a)  # run partially included: swap in the run's start
    if np.any(adjust):
        i = np.nonzero(adjust)[0]
        sums[i] += (p[a[i] + r[i]] - p[a[i]]) - (p[w_hi[i]] - p[w_lo[i]])
    return sums / k


def eta_hat_batch(index: SearchIndex, X, k) -> np.ndarray:
    """Vectorized eta_hat over query rows."""
    ds = index.dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_k(k, ds.n)
    if index._order is not None:
        return _eta_hat_1d(index, X[:, 0], k)

    kq = min(ds.n, k + 1)
    dist, idx = index.tree.query(X, k=kq, workers=-1)
    if kq == 1:
        dist = dist[:, None]
        idx = idx[:, None]
    vals = ds.labels[idx[:, :k]].mean(axis=1)
    if kq > k:
        tied = dist[:, k] - dist[:, k - 1] <= _TIE_RTOL * np.maximum(dist[:, k], 1e-300)
        for i in np.nonzero(tied)[0]:
            ns = knn_query(index, X[i], k)
            vals[i] = ds.labels[ns.indices].mean()
    return vals


def classify_batch(index: SearchIndex, X, k) -> np.ndarray:
    return (eta_hat_batch(index, X, k) > 0.5).astype(np.int8)


def nearest_neighbor_batch(index: SearchIndex, X) -> np.ndarray:
    """Dataset index of each query's nearest neighbor (tie rule applied)."""
    ds = index.dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    kq = min(ds.n, 2)
    dist, idx = index.tree.query(X, k=kq, workers=-1)
    if kq == 1:
        return np.atleast_1d(idx)
    out = idx[:, 0].copy()
    tied = dist[:, 1] - dist[:, 0] <= _TIE_RTOL * np.maximum(dist[:, 1], 1e-300)
    for i in np.nonzero(tied)[0]:
        out[i] = knn_query(index, X[i], 1).indices[0]
    return out
