"""Nearest-neighbour graphs and shortest paths over real or dual edge weights."""

from __future__ import annotations

import heapq

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import dual as dn
from .exceptions import DisconnectedGraph


def knn_indices(X, k):
    """Indices of the ``k`` nearest neighbours of each row (self excluded).

    Uses the value channel only; ties are broken by index.
    """
    Xv = np.asarray(dn.value(X), dtype=float)
    n = Xv.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k_neighbors must be in [1, {n - 1}], got {k}")
    sq = np.sum(Xv * Xv, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * Xv @ Xv.T
    np.fill_diagonal(D2, np.inf)
    return np.argsort(D2, axis=1, kind="stable")[:, :k]


def knn_edges(X, k):
    """Union-symmetrised kNN edge list as two index arrays with ``i < j``."""
    nbrs = knn_indices(X, k)
    n = nbrs.shape[0]
    rows = np.repeat(np.arange(n), k)
    cols = nbrs.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return pairs[:, 0], pairs[:, 1]


def component_sizes(n, I, J):
    adj = coo_matrix((np.ones(len(I)), (I, J)), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=False)
    return np.bincount(labels, minlength=n_comp)


def check_connected(n, I, J):
    sizes = component_sizes(n, I, J)
    if len(sizes) > 1:
        raise DisconnectedGraph(sizes.tolist())


def edge_lengths(X, I, J):
    """Euclidean lengths of edges ``(I[e], J[e])``.

    Coincident endpoints give length 0 with derivative 0: the distance is not
    differentiable there and the zero subgradient keeps duplicates harmless.
    """
    diff = X[I] - X[J]
    sq = dn.sum(diff * diff, axis=1)
    if not dn.is_dual(sq):
        return np.sqrt(sq)
    length = np.sqrt(sq.val)
    safe = np.where(length > 0.0, length, 1.0)
    return dn.DualArray(length, np.where(length > 0.0, sq.der / (2.0 * safe), 0.0))


def dijkstra(n, I, J, weights, source):
    """Single-source shortest paths on an undirected graph.

    Returns ``(dist_value, predecessor, settle_order)``. Branches read only
    the value channel of ``weights``.
    """
    w = np.asarray(dn.value(weights), dtype=float)
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(zip(I.tolist(), J.tolist())):
        adj[a].append((b, w[e], e))
        adj[b].append((a, w[e], e))
    return _dijkstra_adj(n, adj, source)


def _dijkstra_adj(n, adj, source):
    dist = [np.inf] * n
    pred = [-1] * n
    pred_edge = [-1] * n
    done = [False] * n
    order = []
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        order.append(u)
        for v, wuv, e in adj[u]:
            nd = d + wuv
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                pred_edge[v] = e
                heapq.heappush(heap, (nd, v))
    return np.array(dist), np.array(pred), np.array(pred_edge), np.array(order)


def all_pairs_shortest_paths(n, I, J, weights):
    """Geodesic distance matrix of the graph, as real or dual numbers.

    The value channel is Dijkstra from every source. For dual weights the
    derivative of each distance is accumulated along the shortest-path tree
    in settle order, which is exactly what Dijkstra computes when run on dual
    numbers with value-channel comparisons.
    """
    w = np.asarray(dn.value(weights), dtype=float)
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(zip(I.tolist(), J.tolist())):
        adj[a].append((b, w[e], e))
        adj[b].append((a, w[e], e))
    dist = np.empty((n, n))
    pred_edge = np.empty((n, n), dtype=int)
    pred = np.empty((n, n), dtype=int)
    order = np.empty((n, n), dtype=int)
    for s in range(n):
        d, p, pe, o = _dijkstra_adj(n, adj, s)
        if len(o) < n:
            raise DisconnectedGraph(component_sizes(n, I, J).tolist())
        dist[s], pred[s], pred_edge[s], order[s] = d, p, pe, o
    if not dn.is_dual(weights):
        return dist
    wd = weights.der
    dd = np.zeros((n, n))
    rows = np.arange(n)
    for r in range(1, n):
        v = order[:, r]
        u = pred[rows, v]
        dd[rows, v] = dd[rows, u] + wd[pred_edge[rows, v]]
    return dn.DualArray(dist, dd)
