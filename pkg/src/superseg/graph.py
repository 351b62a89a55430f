"""Undirected weighted adjacency graphs over points or superpoints.

Edges are stored canonically: u < v, lexicographically sorted, no
self-loops, no duplicate pairs. All graph constructors are deterministic,
including under coordinate ties (broken by smaller point index), so the
same inputs always produce the same edge order byte for byte.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

# below this many points an all-pairs scan beats building a kd-tree
_BRUTE_FORCE_LIMIT = 256


@dataclass
class GraphConfig:
    k: int = 8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass
class AdjacencyGraph:
    n_nodes: int
    edges: np.ndarray    # (E, 2) int64, u < v, lexicographically sorted
    weights: np.ndarray  # (E,) float64, positive

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.edges) != len(self.weights):
            raise ValueError("edges and weights length mismatch")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def validate(self) -> None:
        e, w = self.edges, self.weights
        if len(e) and (e.min() < 0 or e.max() >= self.n_nodes):
            raise ValueError("edge endpoint out of range")
        if len(e) and np.any(e[:, 0] >= e[:, 1]):
            raise ValueError("edges must be canonical with u < v")
        if len(e) > 1:
            code = e[:, 0] * np.int64(self.n_nodes) + e[:, 1]
            if np.any(np.diff(code) <= 0):
                raise ValueError("edges must be sorted and duplicate-free")
        if len(w) and (not np.all(np.isfinite(w)) or np.any(w <= 0)):
            raise ValueError("weights must be positive and finite")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        if len(self.edges):
            deg += np.bincount(self.edges[:, 0], minlength=self.n_nodes)
            deg += np.bincount(self.edges[:, 1], minlength=self.n_nodes)
        return deg


def canonical_edges(n_nodes: int, pairs: np.ndarray, weights: np.ndarray,
                    combine: str = "sum"):
    """Canonicalize an edge multiset: undirected orientation, self-loops
    dropped, duplicates combined (summing weights or keeping one)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    keep = pairs[:, 0] != pairs[:, 1]
    pairs, weights = pairs[keep], weights[keep]
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    code = lo * np.int64(n_nodes) + hi
    order = np.argsort(code, kind="stable")
    code, weights = code[order], weights[order]
    uniq, starts = np.unique(code, return_index=True)
    if combine == "sum":
        combined = np.add.reduceat(weights, starts) if len(code) else weights
    elif combine == "first":
        combined = weights[starts]
    else:
        raise ValueError(f"unknown combine mode {combine!r}")
    edges = np.column_stack([uniq // n_nodes, uniq % n_nodes])
    return edges, combined


def _brute_force_rows(positions: np.ndarray, rows: np.ndarray, k: int):
    """Exact k nearest neighbors for the given query rows, ties by index."""
    diff = positions[rows, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    d2[np.arange(len(rows)), rows] = np.inf
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    dist = np.sqrt(np.take_along_axis(d2, idx, axis=1))
    return dist, idx


def knn_neighbors(positions: np.ndarray, k: int, threads: int = 1):
    """k nearest neighbors per point, self excluded.

    Returns (dist, idx), each (N, k), rows sorted by (distance, index).
    Distance ties are broken by the smaller point index, including ties
    that straddle the kd-tree result window (those rows are recomputed
    exactly), so the result is reproducible on any input.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    if not (1 <= k < n):
        raise ValueError(f"need 1 <= k < n_points, got k={k}, n={n}")
    if n <= _BRUTE_FORCE_LIMIT:
        return _brute_force_rows(positions, np.arange(n), k)

    window = min(k + 2, n)  # self + k + one sentinel for boundary ties
    tree = cKDTree(positions)
    dist, idx = tree.query(positions, k=window, workers=threads)

    # remove the query point itself from each row
    self_col = idx == np.arange(n)[:, None]
    fallback = ~np.any(self_col, axis=1)  # self pushed out by duplicates
    first_self = np.argmax(self_col, axis=1)
    keep = np.ones((n, window), dtype=bool)
    keep[np.arange(n), np.where(fallback, 0, first_self)] = False
    dist = dist[keep].reshape(n, window - 1)
    idx = idx[keep].reshape(n, window - 1)

    # enforce (distance, index) order; cKDTree's tie order is unspecified
    ties = np.any(dist[:, 1:] == dist[:, :-1], axis=1)
    if np.any(ties):
        rows = np.flatnonzero(ties)
        sub_d, sub_i = dist[rows], idx[rows]
        order = np.argsort(sub_i, axis=1, kind="stable")
        sub_d = np.take_along_axis(sub_d, order, axis=1)
        sub_i = np.take_along_axis(sub_i, order, axis=1)
        order = np.argsort(sub_d, axis=1, kind="stable")
        dist[rows] = np.take_along_axis(sub_d, order, axis=1)
        idx[rows] = np.take_along_axis(sub_i, order, axis=1)

    if window - 1 > k:
        # a tie across the window boundary means unseen equally-near
        # candidates may exist; recompute those rows exactly
        fallback |= dist[:, k] <= dist[:, k - 1]
        dist, idx = dist[:, :k], idx[:, :k]
    if np.any(fallback):
        rows = np.flatnonzero(fallback)
        dist[rows], idx[rows] = _brute_force_rows(positions, rows, k)
    return dist, idx


def build_knn_graph(cloud, cfg: GraphConfig = None, threads: int = 1,
                    neighbor_idx: np.ndarray = None) -> AdjacencyGraph:
    """Symmetrized k-NN graph with unit weights.

    `cloud` may be a PointCloud or a raw (N, 3) position array. A
    precomputed (N, >=k) neighbor index table can be passed to reuse an
    earlier query.
    """
    cfg = cfg or GraphConfig()
    positions = getattr(cloud, "positions", cloud)
    n = len(positions)
    if n <= cfg.k:
        raise ValueError(f"need more points than k: n={n}, k={cfg.k}")
    if neighbor_idx is None:
        _, neighbor_idx = knn_neighbors(positions, cfg.k, threads=threads)
    else:
        neighbor_idx = neighbor_idx[:, :cfg.k]
    src = np.repeat(np.arange(n, dtype=np.int64), cfg.k)
    pairs = np.column_stack([src, neighbor_idx.reshape(-1)])
    edges, _ = canonical_edges(n, pairs, np.ones(len(pairs)), combine="first")
    return AdjacencyGraph(n, edges, np.ones(len(edges)))


def prepare_graph(graph: AdjacencyGraph, positions: np.ndarray, k: int = 8,
                  threads: int = 1) -> AdjacencyGraph:
    """Sanitize a graph: drop self-loops, consolidate duplicate edges by
    summing their weights, and connect every isolated node to its k nearest
    nodes (by centroid distance) with weight 1."""
    n = graph.n_nodes
    edges, weights = canonical_edges(n, graph.edges, graph.weights,
                                     combine="sum")
    clean = AdjacencyGraph(n, edges, weights)
    if n < 2:
        return clean
    isolated = np.flatnonzero(clean.degrees() == 0)
    if len(isolated) == 0:
        return clean
    kk = min(k, n - 1)
    positions = np.asarray(positions, dtype=np.float64)
    if len(isolated) * n <= 512 * 512 or n <= _BRUTE_FORCE_LIMIT:
        _, nbr = _brute_force_rows(positions, isolated, kk)
    else:
        tree = cKDTree(positions)
        _, nbr = tree.query(positions[isolated], k=kk + 1, workers=threads)
        # drop self hits, keep kk columns
        cleaned = np.empty((len(isolated), kk), dtype=np.int64)
        for row, node in enumerate(isolated):
            cand = nbr[row][nbr[row] != node][:kk]
            cleaned[row] = cand
        nbr = cleaned
    src = np.repeat(isolated, kk)
    new_pairs = np.column_stack([src, nbr.reshape(-1)])
    new_edges, _ = canonical_edges(n, new_pairs, np.ones(len(new_pairs)),
                                   combine="first")
    all_edges = np.concatenate([edges, new_edges])
    all_weights = np.concatenate([weights, np.ones(len(new_edges))])
    # reconnection edges touch nodes that had none, so no duplicates arise
    edges, weights = canonical_edges(n, all_edges, all_weights, combine="sum")
    return AdjacencyGraph(n, edges, weights)


def split_edges_by_label(graph: AdjacencyGraph, labels: np.ndarray):
    """Bipartition edges into intra (same label) and inter (different)."""
    labels = np.asarray(labels)
    if labels.shape[0] != graph.n_nodes:
        raise ValueError("labels must cover all nodes")
    same = labels[graph.edges[:, 0]] == labels[graph.edges[:, 1]]
    return graph.edges[same], graph.edges[~same]
