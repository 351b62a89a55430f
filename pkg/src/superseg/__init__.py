"""superseg: greedy superpoint oversegmentation of 3D point clouds.

A point cloud is cut into spatially connected, feature-homogeneous
superpoints by greedily minimizing a contour-regularized piecewise
constant approximation of a per-point embedding over the k-NN graph.
The main entry points are build_knn_graph, geometric_features,
greedy_partition / hierarchical_partition, and oracle_miou; the
`superseg` command wires them into a pipeline.
"""

from .cloud import (PointCloud, VoxelGridSpec, voxel_partition_baseline,
                    voxel_subsample)
from .config import RunConfig, build_run_config, seed_for
from .energy import (ComponentStats, EnergyBreakdown, Superpoint,
                     brute_force_best_partition, energy, merge_gain,
                     superpoint_stats)
from .features import FeatureConfig, fit_linear_embedding, \
    geometric_features
from .formats import (read_embeddings, read_partition, write_embeddings,
                      write_graph_csv, write_partition)
from .graph import (AdjacencyGraph, GraphConfig, build_knn_graph,
                    canonical_edges, knn_neighbors, prepare_graph,
                    split_edges_by_label)
from .metrics import (CurvePoint, OracleReport, ThroughputReport,
                      majority_labels, oracle_miou, purity_curve,
                      throughput_report)
from .partition import (HierarchicalPartition, IterationCapExceeded,
                        MergeState, Partition, PartitionConfig,
                        greedy_partition, hierarchical_partition,
                        merge_step, wcc_max_prop)
from .ply_io import PlyParseError, read_ply, write_ply
from .synth import (Primitive, SceneSpec, load_scene_spec, parse_scene_spec,
                    synth_scene)
from .transition import (SampledEdges, TransitionConfig, TransitionLoss,
                         affinity, sample_edges, transition_loss)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyGraph", "ComponentStats", "CurvePoint", "EnergyBreakdown",
    "FeatureConfig", "GraphConfig", "HierarchicalPartition",
    "IterationCapExceeded", "MergeState", "OracleReport", "Partition",
    "PartitionConfig", "PlyParseError", "PointCloud", "Primitive",
    "RunConfig", "SampledEdges", "SceneSpec", "Superpoint",
    "ThroughputReport", "TransitionConfig", "TransitionLoss",
    "VoxelGridSpec", "affinity", "brute_force_best_partition",
    "build_knn_graph", "build_run_config", "canonical_edges", "energy",
    "fit_linear_embedding", "geometric_features", "greedy_partition",
    "hierarchical_partition", "knn_neighbors", "load_scene_spec",
    "majority_labels", "merge_gain", "merge_step", "oracle_miou",
    "parse_scene_spec", "prepare_graph", "purity_curve", "read_embeddings",
    "read_partition", "read_ply", "sample_edges", "seed_for",
    "split_edges_by_label", "superpoint_stats", "synth_scene",
    "throughput_report", "transition_loss", "voxel_partition_baseline",
    "voxel_subsample", "wcc_max_prop", "write_embeddings",
    "write_graph_csv", "write_partition", "write_ply",
]
