import numpy as np
import pytest

from dimreader import dual as dn
from dimreader.exceptions import DisconnectedGraph
from dimreader.graph import (
    all_pairs_shortest_paths,
    check_connected,
    dijkstra,
    edge_lengths,
    knn_edges,
    knn_indices,
)
from helpers import floyd_warshall, random_graph


def test_dijkstra_matches_floyd_warshall_on_random_graphs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        I, J, w = random_graph(rng, n)
        ref = floyd_warshall(n, I, J, w)
        np.testing.assert_array_equal(all_pairs_shortest_paths(n, I, J, w), ref)
        dist, *_ = dijkstra(n, I, J, w, 0)
        np.testing.assert_array_equal(dist, ref[0])


def test_circle_geodesics_are_arc_hops():
    n = 12
    theta = 2 * np.pi * np.arange(n) / n
    X = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    I, J = knn_edges(X, 2)
    D = all_pairs_shortest_paths(n, I, J, edge_lengths(X, I, J))
    chord = 2 * np.sin(np.pi / n)
    hops = np.minimum(np.abs(np.arange(n)[:, None] - np.arange(n)), n - np.abs(np.arange(n)[:, None] - np.arange(n)))
    np.testing.assert_allclose(D, hops * chord, rtol=1e-12)


def test_knn_is_union_and_excludes_self():
    X = np.array([[0.0], [1.0], [3.0], [10.0]])
    nb = knn_indices(X, 1)
    assert nb[:, 0].tolist() == [1, 0, 1, 2]
    I, J = knn_edges(X, 1)
    assert sorted(zip(I.tolist(), J.tolist())) == [(0, 1), (1, 2), (2, 3)]
    assert np.all(I < J)


def test_disconnected_graph_reports_components():
    X = np.array([[0.0], [0.1], [0.2], [50.0], [50.1]])
    I, J = knn_edges(X, 1)
    with pytest.raises(DisconnectedGraph) as info:
        check_connected(len(X), I, J)
    assert sorted(info.value.component_sizes) == [2, 3]


def test_zero_length_edge_has_zero_derivative():
    X = dn.DualArray(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]))
    L = edge_lengths(X, np.array([0, 0]), np.array([1, 2]))
    np.testing.assert_array_equal(L.val, [0.0, 1.0])
    np.testing.assert_array_equal(L.der, [0.0, -1.0])


def test_dual_shortest_paths_match_finite_differences():
    rng = np.random.default_rng(1)
    n = 25
    I, J, w = random_graph(rng, n)
    w = w + rng.uniform(0, 0.5, len(w))  # break ties so paths are stable
    dw = rng.standard_normal(len(w))
    D = all_pairs_shortest_paths(n, I, J, dn.DualArray(w, dw))
    h = 1e-7
    fd = (all_pairs_shortest_paths(n, I, J, w + h * dw) - all_pairs_shortest_paths(n, I, J, w - h * dw)) / (2 * h)
    np.testing.assert_allclose(D.der, fd, atol=1e-6)
    np.testing.assert_array_equal(D.val, all_pairs_shortest_paths(n, I, J, w))
