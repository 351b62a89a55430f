"""The contour-regularized partition energy and the pairwise merge gain.

A partition Y of the graph nodes is scored by

    Omega(Y) = sum_p ||F_p - mean_{Y(p)}||^2  +  lam * sum_cut w_uv

where mean_{Y(p)} is the mean embedding of p's component and the second sum
runs over edges whose endpoints lie in different components. Merging two
adjacent components P and Q changes the energy by exactly

    delta(P, Q) = -(|P||Q| / (|P|+|Q|)) * ||F_P - F_Q||^2 + lam * w_PQ

with w_PQ the total weight of edges crossing between P and Q; a positive
gain means the merge lowers the energy. `merge_gain` evaluates this closed
form and `energy` the definition, so the identity is testable directly.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np


@dataclass
class Superpoint:
    size: int
    mean_embedding: np.ndarray
    centroid: Optional[np.ndarray] = None


@dataclass
class ComponentStats:
    """Per-component size, mean embedding, and centroid as parallel arrays."""
    sizes: np.ndarray            # (C,) int64
    mean_embeddings: np.ndarray  # (C, M) float64
    centroids: np.ndarray        # (C, 3) float64

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def superpoint(self, c: int) -> Superpoint:
        return Superpoint(size=int(self.sizes[c]),
                          mean_embedding=self.mean_embeddings[c],
                          centroid=self.centroids[c])


@dataclass
class EnergyBreakdown:
    fidelity: float
    contour: float

    @property
    def total(self) -> float:
        return self.fidelity + self.contour


def _component_sums(values: np.ndarray, assignment: np.ndarray,
                    n_components: int) -> np.ndarray:
    cols = [np.bincount(assignment, weights=values[:, j],
                        minlength=n_components)
            for j in range(values.shape[1])]
    return np.column_stack(cols)


def superpoint_stats(F: np.ndarray, assignment: np.ndarray,
                     positions: Optional[np.ndarray] = None) -> ComponentStats:
    """Exact per-component sizes, mean embeddings, and centroids.

    Component ids must be consecutive from 0 with no empty component.
    """
    F = np.asarray(F, dtype=np.float64)
    assignment = np.asarray(assignment, dtype=np.int64)
    if len(assignment) != len(F):
        raise ValueError("assignment must cover all rows of F")
    n_components = int(assignment.max()) + 1 if len(assignment) else 0
    sizes = np.bincount(assignment, minlength=n_components)
    if np.any(sizes == 0):
        raise ValueError("component ids must be consecutive with no gaps")
    means = _component_sums(F, assignment, n_components) / sizes[:, None]
    if positions is None:
        centroids = np.zeros((n_components, 3))
    else:
        positions = np.asarray(positions, dtype=np.float64)
        centroids = (_component_sums(positions, assignment, n_components)
                     / sizes[:, None])
    return ComponentStats(sizes=sizes, mean_embeddings=means,
                          centroids=centroids)


def energy(F: np.ndarray, graph, assignment: np.ndarray,
           lam: float) -> EnergyBreakdown:
    """Evaluate Omega for an assignment: fidelity to per-component means
    plus lam times the total weight of cut edges (each counted once)."""
    F = np.asarray(F, dtype=np.float64)
    assignment = np.asarray(assignment, dtype=np.int64)
    n_components = int(assignment.max()) + 1
    sizes = np.bincount(assignment, minlength=n_components)
    occupied = sizes > 0  # gaps are tolerated here; empty blocks cost nothing
    sums = _component_sums(F, assignment, n_components)
    means = np.zeros_like(sums)
    means[occupied] = sums[occupied] / sizes[occupied, None]
    resid = F - means[assignment]
    fidelity = float(np.sum(resid * resid))
    cut = assignment[graph.edges[:, 0]] != assignment[graph.edges[:, 1]]
    contour = lam * float(np.sum(graph.weights[cut]))
    return EnergyBreakdown(fidelity=fidelity, contour=contour)


def merge_gain(p: Superpoint, q: Superpoint, w_pq: float, lam: float) -> float:
    """Energy decrease from merging two adjacent superpoints (closed form)."""
    diff = np.asarray(p.mean_embedding, dtype=np.float64) - \
        np.asarray(q.mean_embedding, dtype=np.float64)
    d2 = float(np.dot(diff, diff))
    coef = p.size * q.size / (p.size + q.size)
    return -coef * d2 + lam * w_pq


def merge_gain_arrays(sizes_p, means_p, sizes_q, means_q, w_pq, lam):
    """Vectorized merge gain for parallel edge scoring."""
    diff = means_p - means_q
    d2 = np.einsum("ij,ij->i", diff, diff)
    coef = sizes_p * sizes_q / (sizes_p + sizes_q)
    return -coef * d2 + lam * w_pq


def _set_partitions(n: int):
    """All set partitions of range(n) as restricted-growth assignments."""
    assignment = np.zeros(n, dtype=np.int64)

    def rec(i, n_blocks):
        if i == n:
            yield assignment.copy()
            return
        for b in range(n_blocks):
            assignment[i] = b
            yield from rec(i + 1, n_blocks)
        assignment[i] = n_blocks
        yield from rec(i + 1, n_blocks + 1)

    yield from rec(0, 0)


def _blocks_connected(assignment: np.ndarray, adjacency: list) -> bool:
    n_blocks = assignment.max() + 1
    for b in range(n_blocks):
        members = np.flatnonzero(assignment == b)
        if len(members) == 1:
            continue
        member_set = set(members.tolist())
        seen = {members[0]}
        stack = [members[0]]
        while stack:
            node = stack.pop()
            for nbr in adjacency[node]:
                if nbr in member_set and nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        if len(seen) != len(members):
            return False
    return True


def brute_force_best_partition(F: np.ndarray, graph, lam: float,
                               max_nodes: int = 10):
    """Exhaustive minimizer of the energy over partitions whose blocks are
    connected in the graph. Returns (assignment, total energy)."""
    F = np.asarray(F, dtype=np.float64)
    n = len(F)
    if n > max_nodes:
        raise ValueError(f"brute force refused for n={n} > {max_nodes}")
    adjacency = [[] for _ in range(n)]
    for u, v in graph.edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    best_assignment = None
    best_total = np.inf
    for assignment in _set_partitions(n):
        if not _blocks_connected(assignment, adjacency):
            continue
        total = energy(F, graph, assignment, lam).total
        if total < best_total:
            best_total = total
            best_assignment = assignment
    return best_assignment, best_total
