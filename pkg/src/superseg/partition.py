"""Greedy parallel superpoint partitioning.

The partitioner approximately minimizes the contour-regularized energy of
``energy.py`` by agglomeration. Starting from singleton components it
repeats four data-parallel steps:

  1. score: every adjacent component pair (P, Q) gets its exact merge gain
     delta(P, Q); a directed candidate P -> Q exists when delta > 0 or P is
     undersized (|P| < sigma_min, merge forced);
  2. conflict removal: each source keeps only its best outgoing candidate
     (highest gain, ties to the smaller target id);
  3. contraction: weakly connected components of the kept merge edges
     collapse together, so chains of agreeing merges resolve in one pass;
  4. recalibration: component sizes, embedding sums, centroids, and the
     component graph (crossing weights summed) are rebuilt.

The loop stops when no candidate survives or one component remains.

Contracting a whole chain applies several pairwise gains at once, and the
closed-form gain only guarantees an energy decrease for an isolated pair.
Groups of three or more components with no undersized member are therefore
accepted only after an exact net-gain check; a group that would raise the
energy is demoted to its single best pairwise merge. This keeps the energy
strictly decreasing whenever sigma_min = 1 while still allowing chain
merges in the common case.

Weakly connected components are computed by seeded max-id propagation with
graph contraction between rounds, so the work per round is proportional to
the surviving edges.
"""

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .energy import ComponentStats, merge_gain_arrays
from .graph import AdjacencyGraph, canonical_edges, prepare_graph


class IterationCapExceeded(RuntimeError):
    """The merge loop failed to terminate within the safety cap."""


@dataclass
class PartitionConfig:
    lam: float = 0.02
    sigma_min: int = 1
    knn_reconnect: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.sigma_min < 1:
            raise ValueError("sigma_min must be at least 1")


@dataclass
class Partition:
    """One partition level: assignment over the input units plus
    per-component statistics and the contracted adjacency graph."""
    assignment: np.ndarray       # (N,) consecutive component ids
    stats: ComponentStats
    graph: AdjacencyGraph        # over components, crossing weights summed

    @property
    def n_components(self) -> int:
        return self.stats.n_components

    @property
    def components(self) -> list:
        """Superpoint view of the per-component statistics."""
        return [self.stats.superpoint(c) for c in range(self.n_components)]

    @property
    def component_graph(self) -> AdjacencyGraph:
        return self.graph


@dataclass
class HierarchicalPartition:
    levels: list  # Partition; levels[l].assignment maps level l-1 units

    @property
    def maps(self) -> list:
        """maps[l]: level-l component id -> level-(l+1) component id."""
        return [level.assignment for level in self.levels[1:]]

    def point_assignments(self) -> np.ndarray:
        """(N, L) per-point component ids at every level."""
        cols = [self.levels[0].assignment]
        for level in self.levels[1:]:
            cols.append(level.assignment[cols[-1]])
        return np.column_stack(cols)


def _consecutive_ids(values: np.ndarray) -> np.ndarray:
    """Relabel to consecutive ids ordered by first appearance."""
    uniq, first, inverse = np.unique(values, return_index=True,
                                     return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    return rank[inverse]


def wcc_max_prop(n_nodes: int, edges: np.ndarray, seed: int = 0) -> np.ndarray:
    """Weakly connected components by iterated max propagation.

    Each round assigns random ids, lets every node take the maximum id over
    its closed neighborhood, and contracts nodes that agreed; at the
    fixpoint the surviving ids label the components. Ids are consecutive
    from 0; their order depends on the seed, not on the structure.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n_nodes == 0:
        return np.empty(0, dtype=np.int64)
    live = edges[:, 0] != edges[:, 1]
    u, v = edges[live, 0], edges[live, 1]
    rng = np.random.default_rng(seed)
    composed = np.arange(n_nodes, dtype=np.int64)
    n = n_nodes
    while True:
        ids = rng.permutation(n)
        prop = ids.copy()
        if len(u):
            np.maximum.at(prop, u, ids[v])
            np.maximum.at(prop, v, ids[u])
        if np.array_equal(prop, ids):
            return ids[composed]
        consec = _consecutive_ids(prop)
        composed = consec[composed]
        n = int(consec.max()) + 1
        cu, cv = consec[u], consec[v]
        keep = cu != cv
        if np.any(keep):
            lo = np.minimum(cu[keep], cv[keep])
            hi = np.maximum(cu[keep], cv[keep])
            code = np.unique(lo * np.int64(n) + hi)
            u, v = code // n, code % n
        else:
            u = v = np.empty(0, dtype=np.int64)


@dataclass
class MergeState:
    """Mutable loop state: one row per current component."""
    sizes: np.ndarray      # (C,) float64 total point counts
    sums: np.ndarray       # (C, M) embedding sums (means = sums / sizes)
    pos_sums: np.ndarray   # (C, 3) position sums
    edges: np.ndarray      # (E, 2) canonical component pairs
    weights: np.ndarray    # (E,) summed crossing weights

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    @property
    def means(self) -> np.ndarray:
        return self.sums / self.sizes[:, None]


def _candidate_gains(state: MergeState, lam: float):
    means = state.means
    u, v = state.edges[:, 0], state.edges[:, 1]
    return merge_gain_arrays(state.sizes[u], means[u], state.sizes[v],
                             means[v], state.weights, lam)


def _best_per_source(src, dst, gain, n_sources):
    """Keep, per source, the edge with maximal gain (ties: smaller target).
    Returns filtered (src, dst, gain) arrays sorted by source id."""
    best = np.full(n_sources, -np.inf)
    np.maximum.at(best, src, gain)
    at_max = gain == best[src]
    target = np.full(n_sources, np.iinfo(np.int64).max)
    np.minimum.at(target, src[at_max], dst[at_max])
    chosen = at_max & (dst == target[src])
    src, dst, gain = src[chosen], dst[chosen], gain[chosen]
    order = np.argsort(src, kind="stable")
    return src[order], dst[order], gain[order]


def merge_step(state: MergeState, cfg: PartitionConfig):
    """Directed merge candidates after conflict removal.

    Returns (merge_edges (E', 2), gains (E',)); an empty edge array signals
    termination. The state's graph must already be sanitized.
    """
    if len(state.edges) == 0:
        empty = np.empty((0, 2), dtype=np.int64)
        return empty, np.empty(0)
    gain = _candidate_gains(state, cfg.lam)
    u, v = state.edges[:, 0], state.edges[:, 1]
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    gain2 = np.concatenate([gain, gain])
    valid = (gain2 > 0) | (state.sizes[src] < cfg.sigma_min)
    if not np.any(valid):
        empty = np.empty((0, 2), dtype=np.int64)
        return empty, np.empty(0)
    src, dst, kept_gain = _best_per_source(src[valid], dst[valid],
                                           gain2[valid], state.n_components)
    return np.column_stack([src, dst]), kept_gain


def _group_net_gains(groups, state: MergeState, lam: float, n_groups: int):
    """Exact energy decrease of collapsing every group at once.

    Per group: |T| ||mean_T||^2 - sum_U |U| ||mean_U||^2 + lam * W_internal,
    written with sums as ||sum_T||^2/|T| so accumulated sums stay exact.
    """
    q_member = np.einsum("ij,ij->i", state.sums, state.sums) / state.sizes
    member_part = np.bincount(groups, weights=q_member, minlength=n_groups)
    group_sizes = np.bincount(groups, weights=state.sizes,
                              minlength=n_groups)
    group_sums = np.zeros((n_groups, state.sums.shape[1]))
    for j in range(state.sums.shape[1]):
        group_sums[:, j] = np.bincount(groups, weights=state.sums[:, j],
                                       minlength=n_groups)
    q_group = np.einsum("ij,ij->i", group_sums, group_sums) / group_sizes
    internal = groups[state.edges[:, 0]] == groups[state.edges[:, 1]]
    w_int = np.bincount(groups[state.edges[:, 0]][internal],
                        weights=state.weights[internal], minlength=n_groups)
    return q_group - member_part + lam * w_int


def _demote_oversized_groups(groups, merge_edges, gains, state: MergeState,
                             cfg: PartitionConfig, wcc_seed: int):
    """Reject chain merges whose exact net gain is not positive.

    Groups of >= 3 members containing no forced (undersized) member must
    lower the energy as a whole; otherwise only their single best pairwise
    merge is applied this iteration. Returns the final group assignment.
    """
    n_groups = int(groups.max()) + 1
    member_count = np.bincount(groups, minlength=n_groups)
    has_forced = np.bincount(
        groups, weights=(state.sizes < cfg.sigma_min).astype(np.float64),
        minlength=n_groups) > 0
    checkable = (member_count >= 3) & ~has_forced
    if not np.any(checkable):
        return groups
    net = _group_net_gains(groups, state, cfg.lam, n_groups)
    bad = checkable & (net <= 0)
    if not np.any(bad):
        return groups

    edge_group = groups[merge_edges[:, 0]]
    good_edge = ~bad[edge_group]
    kept = [merge_edges[good_edge]]
    # best edge per demoted group: max gain, ties to smaller (src, dst)
    bad_rows = np.flatnonzero(~good_edge)
    bg = edge_group[bad_rows]
    best = np.full(n_groups, -np.inf)
    np.maximum.at(best, bg, gains[bad_rows])
    at_max = gains[bad_rows] == best[bg]
    cand_rows = bad_rows[at_max]
    cand_g = edge_group[cand_rows]
    best_src = np.full(n_groups, np.iinfo(np.int64).max)
    np.minimum.at(best_src, cand_g, merge_edges[cand_rows, 0])
    src_ok = merge_edges[cand_rows, 0] == best_src[cand_g]
    cand_rows = cand_rows[src_ok]
    cand_g = edge_group[cand_rows]
    best_dst = np.full(n_groups, np.iinfo(np.int64).max)
    np.minimum.at(best_dst, cand_g, merge_edges[cand_rows, 1])
    dst_ok = merge_edges[cand_rows, 1] == best_dst[cand_g]
    kept.append(merge_edges[cand_rows[dst_ok]])

    final_edges = np.concatenate(kept, axis=0)
    regrouped = wcc_max_prop(state.n_components, final_edges, seed=wcc_seed)
    return _consecutive_ids(regrouped)


def _contract(state: MergeState, groups: np.ndarray) -> MergeState:
    n_groups = int(groups.max()) + 1
    sizes = np.bincount(groups, weights=state.sizes, minlength=n_groups)
    sums = np.zeros((n_groups, state.sums.shape[1]))
    for j in range(state.sums.shape[1]):
        sums[:, j] = np.bincount(groups, weights=state.sums[:, j],
                                 minlength=n_groups)
    pos_sums = np.zeros((n_groups, 3))
    for j in range(3):
        pos_sums[:, j] = np.bincount(groups, weights=state.pos_sums[:, j],
                                     minlength=n_groups)
    gu, gv = groups[state.edges[:, 0]], groups[state.edges[:, 1]]
    cross = gu != gv
    edges, weights = canonical_edges(
        n_groups, np.column_stack([gu[cross], gv[cross]]),
        state.weights[cross], combine="sum")
    return MergeState(sizes=sizes, sums=sums, pos_sums=pos_sums,
                      edges=edges, weights=weights)


def _wcc_seed(base_seed: int, iteration: int, phase: int) -> int:
    ss = np.random.SeedSequence([int(base_seed) & (2**63 - 1),
                                 iteration, phase])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def greedy_partition(F: np.ndarray, graph: AdjacencyGraph,
                     positions: np.ndarray, cfg: PartitionConfig,
                     sizes: Optional[np.ndarray] = None,
                     trace: Optional[list] = None) -> Partition:
    """Agglomerate graph nodes into superpoints (see module docstring).

    `sizes` carries per-node point counts when the nodes are themselves
    superpoints of a finer level; by default every node counts as one
    point. When `trace` is a list, one record per iteration is appended
    with the applied merge edges, their gains, and the group assignment,
    for energy-bookkeeping verification.
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("F must be an (N, M) matrix")
    n = len(F)
    positions = np.asarray(positions, dtype=np.float64)
    if sizes is None:
        sizes = np.ones(n)
    else:
        sizes = np.asarray(sizes, dtype=np.float64)

    clean = prepare_graph(graph, positions, k=cfg.knn_reconnect)
    state = MergeState(sizes=sizes.copy(), sums=F * sizes[:, None],
                       pos_sums=positions * sizes[:, None],
                       edges=clean.edges, weights=clean.weights)
    assignment = np.arange(n, dtype=np.int64)

    cap = int(10 * np.log2(max(n, 2)) + 50)
    for iteration in range(cap + 1):
        if iteration == cap:
            raise IterationCapExceeded(
                f"merge loop exceeded {cap} iterations on {n} nodes")
        merge_edges, gains = merge_step(state, cfg)
        if len(merge_edges) == 0:
            break
        groups = wcc_max_prop(state.n_components, merge_edges,
                              seed=_wcc_seed(cfg.seed, iteration, 0))
        groups = _consecutive_ids(groups)
        groups = _demote_oversized_groups(groups, merge_edges, gains, state,
                                          cfg, _wcc_seed(cfg.seed,
                                                         iteration, 1))
        if trace is not None:
            trace.append({"iteration": iteration,
                          "merge_edges": merge_edges, "gains": gains,
                          "groups": groups,
                          "assignment_before": assignment.copy()})
        assignment = groups[assignment]
        state = _contract(state, groups)
        if state.n_components == 1:
            break

    stats = ComponentStats(sizes=state.sizes.astype(np.int64)
                           if np.allclose(state.sizes,
                                          np.rint(state.sizes))
                           else state.sizes,
                           mean_embeddings=state.means,
                           centroids=state.pos_sums / state.sizes[:, None])
    comp_graph = AdjacencyGraph(state.n_components, state.edges,
                                state.weights)
    return Partition(assignment=assignment, stats=stats, graph=comp_graph)


def hierarchical_partition(F: np.ndarray, graph: AdjacencyGraph,
                           positions: np.ndarray,
                           cfg_per_level: list) -> HierarchicalPartition:
    """Recursive coarsening: level l+1 partitions the superpoints of level
    l using their mean embeddings, accumulated sizes, centroids, and the
    weight-summed component graph."""
    if not cfg_per_level:
        raise ValueError("need at least one level config")
    mins = [cfg.sigma_min for cfg in cfg_per_level]
    if any(b < a for a, b in zip(mins, mins[1:])):
        warnings.warn("per-level sigma_min is not non-decreasing; coarser "
                      "levels may not merge anything", stacklevel=2)
    levels = []
    level = greedy_partition(F, graph, positions, cfg_per_level[0])
    levels.append(level)
    for cfg in cfg_per_level[1:]:
        stats = level.stats
        level = greedy_partition(stats.mean_embeddings, level.graph,
                                 stats.centroids, cfg,
                                 sizes=np.asarray(stats.sizes,
                                                  dtype=np.float64))
        levels.append(level)
    return HierarchicalPartition(levels=levels)
