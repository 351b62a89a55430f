"""Independent reference implementations the tests check against.

Everything here is deliberately written the slow, obvious way (loops,
dicts, O(N^2) scans) so a bug in the library cannot hide in a shared
shortcut.
"""

import numpy as np


class DisjointSet:
    """Classic union-find with path compression, as a WCC oracle."""

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def dsu_components(n_nodes, edges):
    """Component labels, consecutive in order of first appearance."""
    dsu = DisjointSet(n_nodes)
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        dsu.union(int(u), int(v))
    labels = {}
    out = np.empty(n_nodes, dtype=np.int64)
    for i in range(n_nodes):
        root = dsu.find(i)
        if root not in labels:
            labels[root] = len(labels)
        out[i] = labels[root]
    return out


def same_partition(a, b):
    """True when two labelings induce the same grouping."""
    a = np.asarray(a).tolist()
    b = np.asarray(b).tolist()
    if len(a) != len(b):
        return False
    fwd, bwd = {}, {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


def brute_knn(positions, k):
    """O(N^2) k nearest neighbors, ties broken by point index."""
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    dist = np.empty((n, k))
    idx = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d2 = np.sum((positions - positions[i]) ** 2, axis=1)
        order = sorted((float(d2[j]), j) for j in range(n) if j != i)
        for col in range(k):
            dist[i, col] = np.sqrt(order[col][0])
            idx[i, col] = order[col][1]
    return dist, idx


def naive_energy(F, edges, weights, assignment, lam):
    """Direct evaluation of the partition energy from its definition."""
    F = np.asarray(F, dtype=np.float64)
    assignment = np.asarray(assignment)
    total = 0.0
    for comp in np.unique(assignment):
        rows = F[assignment == comp]
        total += float(np.sum((rows - rows.mean(axis=0)) ** 2))
    for (u, v), w in zip(np.asarray(edges).reshape(-1, 2), weights):
        if assignment[u] != assignment[v]:
            total += lam * float(w)
    return total


def naive_transition_loss(F, intra, inter, tau):
    """Loss only, straight from the definitions (no clamping)."""
    F = np.asarray(F, dtype=np.float64)
    loss = 0.0
    for u, v in np.asarray(intra, dtype=np.int64).reshape(-1, 2):
        loss += float(np.linalg.norm(F[u] - F[v])) / tau
    for u, v in np.asarray(inter, dtype=np.int64).reshape(-1, 2):
        a = np.exp(-float(np.linalg.norm(F[u] - F[v])) / tau)
        loss += -np.log(1.0 - a)
    return loss


def fd_gradient(fn, F, h=1e-5):
    """Central finite differences of a scalar function of F."""
    F = np.asarray(F, dtype=np.float64)
    grad = np.zeros_like(F)
    for i in range(F.shape[0]):
        for j in range(F.shape[1]):
            up = F.copy()
            up[i, j] += h
            down = F.copy()
            down[i, j] -= h
            grad[i, j] = (fn(up) - fn(down)) / (2 * h)
    return grad


def brute_voxel_groups(positions, cell):
    """Hash-grid voxel grouping: floor((p - min) / cell) per axis."""
    positions = np.asarray(positions, dtype=np.float64)
    keys = np.floor((positions - positions.min(axis=0)) / cell).astype(int)
    groups = {}
    for i, key in enumerate(map(tuple, keys)):
        groups.setdefault(key, []).append(i)
    return groups


def grid_cloud(nx, ny, spacing=1.0, z=0.0):
    """Regular (nx x ny) grid in the z-plane."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing)
    return np.column_stack([xs.ravel(), ys.ravel(),
                            np.full(nx * ny, float(z))])


def random_connected_instance(rng, n, m, extra_edges=3):
    """Random embeddings plus a connected canonical edge list."""
    F = rng.normal(size=(n, m))
    pairs = [(i, i + 1) for i in range(n - 1)]
    for _ in range(extra_edges):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            pairs.append((int(u), int(v)))
    pairs = np.asarray(pairs, dtype=np.int64)
    weights = rng.uniform(0.5, 2.0, size=len(pairs))
    return F, pairs, weights
