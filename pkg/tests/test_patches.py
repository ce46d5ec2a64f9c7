import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from e3normals.data import SynthSpec, synthesize
from e3normals.patches import (
    KnnIndex,
    Patch,
    ProximityGraph,
    build_graph,
    cover,
    geodesic_patch,
    half_patch,
    knn_patch,
    make_patch,
    select_uncovered,
)


def bellman_ford(n, edges, src):
    dist = [math.inf] * n
    dist[src] = 0.0
    for _ in range(n - 1):
        changed = False
        for u, v, w in edges:
            for a, b in ((u, v), (v, u)):
                if dist[a] + w < dist[b]:
                    dist[b] = dist[a] + w
                    changed = True
        if not changed:
            break
    return np.array(dist)


def union_find_components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v, _ in edges:
        parent[find(u)] = find(v)
    return [find(i) for i in range(n)]


def random_graph(rng, n, p):
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.uniform() < p:
                edges.append((u, v, float(rng.uniform(0.01, 2.0))))
    return edges


def graph_from(n, edges):
    if not edges:
        return ProximityGraph.from_edges(n, [], [], [])
    s, d, w = zip(*edges)
    return ProximityGraph.from_edges(n, s, d, w)


def two_planes(gap=0.05, side=30, spacing=0.02):
    g = np.arange(side) * spacing
    xx, yy = np.meshgrid(g, g)
    a = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(side * side)])
    b = a + [0.0, 0.0, gap]
    return np.vstack([a, b])


def test_knn_query_order_and_ties():
    pts = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [2, 0, 0]], float)
    idx, d = KnnIndex(pts).query([0, 0, 0], 4)
    assert list(idx) == [0, 1, 2, 3]
    np.testing.assert_array_equal(d, [0, 1, 1, 1])
    idx, _ = KnnIndex(pts).query([0, 0, 0], 99)
    assert len(idx) == 5


def test_knn_grid_ball_ordering():
    g = np.arange(9, dtype=float)
    pts = np.array(np.meshgrid(g, g, g, indexing="ij")).reshape(3, -1).T
    index = KnnIndex(pts)
    seed = int(np.flatnonzero((pts == 4).all(axis=1))[0])
    d = np.sqrt(((pts - pts[seed]) ** 2).sum(axis=1))
    order = sorted(range(len(pts)), key=lambda i: (i != seed, d[i], i))
    for n in (1, 7, 27, 50, 200):
        p = knn_patch(index, seed, n)
        assert list(p.members) == order[:n]
        assert not p.is_geodesic
    assert len(knn_patch(index, seed, 10_000)) == len(pts)


def test_query_all_matches_brute_force():
    rng = np.random.default_rng(0)
    # integer grid coordinates give many exact distance ties
    pts = rng.integers(0, 6, size=(300, 3)).astype(float)
    pts = np.unique(pts, axis=0)
    idx, dist = KnnIndex(pts).query_all(12)
    for i in range(len(pts)):
        d = np.sqrt(((pts - pts[i]) ** 2).sum(axis=1))
        want = sorted(range(len(pts)), key=lambda j: (j != i, d[j], j))[:12]
        assert list(idx[i]) == want


def test_build_graph_examples():
    line = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float)
    g = build_graph(line, 1)
    assert g.degree(1) == 2

    rng = np.random.default_rng(1)
    pts = np.vstack([rng.normal(size=(40, 3)) * 0.1, rng.normal(size=(40, 3)) * 0.1 + 10])
    g = build_graph(pts, 4)
    assert len(g.component_size) == 2
    s = np.repeat(np.arange(g.n_points), np.diff(g.indptr))
    roots = union_find_components(g.n_points, list(zip(s, g.indices, g.weights)))
    same = np.equal.outer(roots, roots)
    assert np.array_equal(same, np.equal.outer(g.component_id, g.component_id))

    g = build_graph(rng.normal(size=(15, 3)), 14)
    assert len(g.component_size) == 1 and all(g.degree(i) == 14 for i in range(15))


def test_graph_symmetric_with_euclidean_weights():
    pts = np.random.default_rng(2).normal(size=(100, 3))
    g = build_graph(pts, 5)
    pairs = {}
    for u in range(g.n_points):
        for v, w in g.adjacency()[u]:
            pairs[(u, v)] = w
            assert w == pytest.approx(np.linalg.norm(pts[u] - pts[v]), rel=1e-15)
    assert all(pairs[(v, u)] == w for (u, v), w in pairs.items())


def test_path_graph_patch():
    g = graph_from(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
    p = geodesic_patch(g, 0, 3)
    assert list(p.members) == [0, 1, 2]
    assert list(p.center_distances) == [0, 1, 2]
    assert p.is_geodesic


def test_dijkstra_matches_bellman_ford():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 201))
        edges = random_graph(rng, n, min(1.0, 4.0 / n))
        g = graph_from(n, edges)
        seed = int(rng.integers(n))
        oracle = bellman_ford(n, edges, seed)
        p = geodesic_patch(g, seed, n)
        reach = np.isfinite(oracle)
        assert set(p.members) == set(np.flatnonzero(reach))
        np.testing.assert_allclose(p.center_distances, oracle[p.members], rtol=1e-9, atol=0)
        assert np.all(np.diff(p.center_distances) >= 0)
        assert len(set(p.members)) == len(p.members) and p.members[0] == seed


def test_two_planes_geodesic_vs_euclidean():
    pts = two_planes()
    half = len(pts) // 2
    index = KnnIndex(pts)
    g = build_graph(pts, 6, index)
    assert len(g.component_size) == 2
    seed = half // 2 + 15
    geo = geodesic_patch(g, seed, 200)
    assert np.all(geo.members < half)
    assert np.any(knn_patch(index, seed, 200).members >= half)


def test_fallback_when_component_small():
    rng = np.random.default_rng(4)
    pts = np.vstack([rng.normal(size=(30, 3)) * 0.1, rng.normal(size=(200, 3)) * 0.1 + 10])
    index = KnnIndex(pts)
    g = build_graph(pts, 5, index)
    assert not make_patch(g, index, 0, 50).is_geodesic
    assert make_patch(g, index, 100, 50).is_geodesic
    assert not make_patch(g, index, 100, 50, geodesic=False).is_geodesic


def test_select_uncovered_examples():
    assert select_uncovered(5, set()) == 0
    assert select_uncovered(5, set(range(5))) is None
    assert select_uncovered(5, {0, 1, 3}) == 2


def test_half_patch_examples():
    def p(n):
        return Patch(0, np.arange(n), np.arange(n, dtype=float), False)

    assert list(half_patch(p(4))) == [0, 1]
    assert list(half_patch(p(5))) == [0, 1, 2]
    assert list(half_patch(p(1))) == [0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(20, 300), st.integers(3, 60))
def test_cover_terminates_and_covers(seed, n, size):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    index = KnnIndex(pts)
    g = build_graph(pts, 8, index)
    patches = cover(n, lambda s: make_patch(g, index, s, min(size, n)))
    covered = np.zeros(n, bool)
    for p in patches:
        assert not covered[p.center_index]
        covered[half_patch(p)] = True
    assert covered.all()
    # each pass covers at least its own seed
    assert len(patches) <= n


@pytest.mark.parametrize("shape", ["plane", "sphere", "cylinder", "torus", "cube"])
@pytest.mark.parametrize("size", [64, 256, 1400])
def test_cover_iteration_bound_on_surfaces(shape, size):
    pts = synthesize(SynthSpec(shape, 5000, seed=1)).positions
    index = KnnIndex(pts)
    g = build_graph(pts, 50, index)
    for geodesic in (True, False):
        patches = cover(len(pts), lambda s: make_patch(g, index, s, size, geodesic))
        assert len(patches) <= 2 * math.ceil(len(pts) / math.ceil(size / 2))
