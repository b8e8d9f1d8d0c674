"""Fill-reducing symmetric orderings.

:func:`nested_dissection` is George's automatic nested dissection: each
connected piece is split by the middle level set of a breadth-first search
rooted at a pseudo-peripheral vertex, the two halves are ordered
recursively and the separator is numbered last.  On grid graphs the level
sets are straight or diagonal lines, which is what keeps fill at
``O(n log n)``.
"""
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

__all__ = ["nested_dissection", "adjacency_graph"]


def adjacency_graph(matrix):
    """Symmetric 0/1 pattern of ``matrix`` without the diagonal (CSR)."""
    a = sp.csr_matrix(matrix, copy=True)
    a.data = np.ones_like(a.data, dtype=np.int8)
    a = (a + a.T).tocsr()
    a.setdiag(0)
    a.eliminate_zeros()
    a.data[:] = 1
    return a


def _levels(graph, root):
    dist = csgraph.dijkstra(graph, directed=False, unweighted=True, indices=root)
    return dist


def _pseudo_peripheral(graph):
    root = int(np.argmin(np.diff(graph.indptr)))
    dist = _levels(graph, root)
    ecc = dist.max()
    for _ in range(4):
        far = np.flatnonzero(dist == dist.max())
        deg = np.diff(graph.indptr)[far]
        cand = int(far[np.argmin(deg)])
        cand_dist = _levels(graph, cand)
        if cand_dist.max() <= ecc:
            break
        root, dist, ecc = cand, cand_dist, cand_dist.max()
    return root, dist


def _dissect(graph, nodes, leaf_size, out):
    n = len(nodes)
    if n <= leaf_size:
        out.append(nodes)
        return
    n_comp, labels = csgraph.connected_components(graph, directed=False)
    if n_comp > 1:
        for c in range(n_comp):
            sel = np.flatnonzero(labels == c)
            _dissect(graph[sel][:, sel], nodes[sel], leaf_size, out)
        return
    _, dist = _pseudo_peripheral(graph)
    level = dist.astype(np.int64)
    counts = np.bincount(level)
    cumulative = np.cumsum(counts)
    mid = int(np.searchsorted(cumulative, n / 2.0))
    sep = level == mid
    for sel in (np.flatnonzero(level < mid), np.flatnonzero(level > mid)):
        if sel.size:
            _dissect(graph[sel][:, sel], nodes[sel], leaf_size, out)
    out.append(nodes[sep])


def nested_dissection(matrix, leaf_size=32):
    """Permutation ``perm`` such that ``A[perm][:, perm]`` factors with little fill."""
    graph = adjacency_graph(matrix)
    n = graph.shape[0]
    out = []
    _dissect(graph, np.arange(n), leaf_size, out)
    perm = np.concatenate(out) if out else np.arange(0)
    return perm.astype(np.int64)
