"""Neighbour indexes, proximity graphs and patch construction.

Distances everywhere are recomputed with one formula (``sqrt(sum(d * d))``) so that
orderings are reproducible; ties are broken by ascending point index, except that a
patch center always comes first.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ConfigError, EmptyInput
from .geom import as_points

_EXTRA = 4


def _dist(points: np.ndarray, p: np.ndarray) -> np.ndarray:
    d = points - p
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class Patch:
    center_index: int
    members: np.ndarray
    center_distances: np.ndarray
    is_geodesic: bool

    def __len__(self) -> int:
        return len(self.members)

    @property
    def half_size(self) -> int:
        return (len(self.members) + 1) // 2

    @property
    def half_radius(self) -> float:
        return float(self.center_distances[self.half_size - 1])


class KnnIndex:
    """Exact k-nearest-neighbour queries over a fixed cloud."""

    def __init__(self, points, k_graph: int = 50):
        self.points = as_points(points)
        self.k_graph = k_graph
        self.tree = cKDTree(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def _exact(self, p: np.ndarray, k: int, first: int | None):
        _, nn = self.tree.query(p, k)
        d_k = _dist(self.points[np.atleast_1d(nn)], p).max()
        cand = np.asarray(self.tree.query_ball_point(p, d_k * (1.0 + 1e-9) + 1e-300), dtype=np.intp)
        dist = _dist(self.points[cand], p)
        not_first = np.ones(len(cand)) if first is None else (cand != first).astype(float)
        order = np.lexsort((cand, not_first, dist))[:k]
        return cand[order], dist[order]

    def query(self, p, k: int, first: int | None = None):
        """Indices and distances of the ``min(k, n)`` points nearest ``p``.

        ``first`` names a point that wins every distance tie (the query point itself).
        """
        p = np.asarray(p, dtype=np.float64)
        k = min(int(k), len(self.points))
        if k < 1:
            raise ConfigError("k must be >= 1")
        return self._exact(p, k, first)

    def query_all(self, k: int):
        """Self-first kNN rows for every point: arrays of shape ``(n, min(k, n))``."""
        n = len(self.points)
        k = min(int(k), n)
        kk = min(k + _EXTRA, n)
        _, idx = self.tree.query(self.points, kk)
        idx = np.asarray(idx).reshape(n, kk)
        diff = self.points[idx] - self.points[:, None, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        rows = np.arange(n)[:, None]
        not_self = (idx != rows).astype(float)
        order = np.lexsort((idx, not_self, dist), axis=-1)
        idx = np.take_along_axis(idx, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        # rows whose boundary distance reaches the last retrieved one may hide ties
        if kk < n:
            suspect = np.nonzero(dist[:, k - 1] >= dist[:, kk - 1])[0]
            for i in suspect:
                idx[i, :k], dist[i, :k] = self._exact(self.points[i], k, int(i))
        return idx[:, :k], dist[:, :k]


@dataclass
class ProximityGraph:
    """Symmetrised kNN graph in CSR form with Euclidean edge lengths."""

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    component_id: np.ndarray
    component_size: np.ndarray
    k: int
    _adj: list = field(default=None, repr=False)

    @property
    def n_points(self) -> int:
        return len(self.indptr) - 1

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    def size_of_component(self, i: int) -> int:
        return int(self.component_size[self.component_id[i]])

    def adjacency(self) -> list:
        if self._adj is None:
            ind, w = self.indices.tolist(), self.weights.tolist()
            ptr = self.indptr.tolist()
            self._adj = [
                list(zip(ind[ptr[i] : ptr[i + 1]], w[ptr[i] : ptr[i + 1]]))
                for i in range(self.n_points)
            ]
        return self._adj

    @classmethod
    def from_edges(cls, n: int, src, dst, weights, k: int = 0) -> "ProximityGraph":
        """Undirected graph from an edge list; duplicate edges keep the first weight."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0):
            raise ConfigError("edge weights must be non-negative")
        keep = src != dst
        s = np.concatenate([src[keep], dst[keep]])
        d = np.concatenate([dst[keep], src[keep]])
        ww = np.concatenate([w[keep], w[keep]])
        key, first = np.unique(s * n + d, return_index=True)
        s, d, ww = key // n, key % n, ww[first]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, s + 1, 1)
        indptr = np.cumsum(indptr)
        mat = csr_matrix((np.ones(len(s)), (s, d)), shape=(n, n))
        n_comp, labels = connected_components(mat, directed=False)
        sizes = np.bincount(labels, minlength=n_comp)
        return cls(indptr, d.astype(np.int64), ww, labels, sizes, k)


def build_graph(points, k: int, index: KnnIndex | None = None) -> ProximityGraph:
    pts = as_points(points)
    if k < 1:
        raise ConfigError("graph k must be >= 1")
    n = len(pts)
    index = index if index is not None else KnnIndex(pts, k)
    nbr, dist = index.query_all(k + 1)
    nbr, dist = nbr[:, 1:], dist[:, 1:]
    src = np.repeat(np.arange(n), nbr.shape[1])
    return ProximityGraph.from_edges(n, src, nbr.ravel(), dist.ravel(), k)


def geodesic_patch(graph: ProximityGraph, seed: int, n: int) -> Patch:
    """The ``n`` points with the smallest shortest-path distance from ``seed``."""
    if n < 1:
        raise ConfigError("patch size must be >= 1")
    adj = graph.adjacency()
    best = [np.inf] * graph.n_points
    done = [False] * graph.n_points
    best[seed] = 0.0
    heap = [(0.0, seed)]
    members, dists = [], []
    while heap and len(members) < n:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        members.append(u)
        dists.append(d)
        for v, w in adj[u]:
            nd = d + w
            if nd < best[v]:
                best[v] = nd
                heapq.heappush(heap, (nd, v))
    return Patch(seed, np.array(members, dtype=np.int64), np.array(dists), True)


def knn_patch(index: KnnIndex, seed: int, n: int) -> Patch:
    if n < 1:
        raise ConfigError("patch size must be >= 1")
    idx, dist = index.query(index.points[seed], n, first=seed)
    return Patch(seed, idx.astype(np.int64), dist, False)


def make_patch(
    graph: ProximityGraph | None, index: KnnIndex, seed: int, n: int, geodesic: bool = True
) -> Patch:
    """Geodesic patch, or a kNN patch when the seed's component is smaller than ``n``."""
    if geodesic and graph is not None and graph.size_of_component(seed) >= n:
        return geodesic_patch(graph, seed, n)
    return knn_patch(index, seed, n)


def select_uncovered(cloud, covered) -> int | None:
    """Lowest-index point not yet covered, or ``None`` once everything is."""
    n = cloud if isinstance(cloud, (int, np.integer)) else len(cloud)
    if n == 0:
        raise EmptyInput("empty cloud")
    if isinstance(covered, np.ndarray) and covered.dtype == bool:
        mask = covered
    else:
        mask = np.zeros(n, dtype=bool)
        mask[np.fromiter(covered, dtype=np.int64)] = True
    if mask.all():
        return None
    return int(np.argmin(mask))


def half_patch(p: Patch) -> np.ndarray:
    return p.members[: p.half_size]


def cover(n_points: int, make) -> list[Patch]:
    """Coverage loop: seed at the lowest uncovered point until every point is covered.

    ``make(seed)`` builds the patch and its nearest half is marked covered.
    """
    covered = np.zeros(n_points, dtype=bool)
    patches = []
    while True:
        q = select_uncovered(n_points, covered)
        if q is None:
            return patches
        p = make(q)
        covered[half_patch(p)] = True
        patches.append(p)
