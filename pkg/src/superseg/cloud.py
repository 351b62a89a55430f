"""Point cloud container and voxel-grid operations."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class PointCloud:
    """A point cloud with optional radiometry and ground-truth labels.

    positions are metric xyz coordinates, one row per point. colors (RGB in
    [0,1]), intensity (in [0,1]) and integer class labels are optional and,
    when present, must share the point count. n_classes bounds the label
    values: labels, when present, lie in [0, n_classes).
    """

    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    intensity: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    n_classes: Optional[int] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be an (N, 3) array")
        n = len(self.positions)
        if n < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.float64)
            if self.colors.shape != (n, 3):
                raise ValueError("colors must be an (N, 3) array")
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=np.float64)
            if self.intensity.shape != (n,):
                raise ValueError("intensity must be an (N,) array")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("labels must be an (N,) array")
            if self.n_classes is None:
                self.n_classes = int(self.labels.max()) + 1
            elif self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise ValueError("labels must lie in [0, n_classes)")

    @property
    def n_points(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass
class VoxelGridSpec:
    """Regular grid for subsampling. The grid origin is the axis-aligned
    minimum corner of the cloud being processed, so the grouping is a pure
    function of the cloud and the cell size."""

    cell_size: float

    def __post_init__(self):
        if not (self.cell_size > 0):
            raise ValueError("cell_size must be positive")


def _voxel_keys(positions: np.ndarray, cell_size: float) -> np.ndarray:
    """Integer (N, 3) voxel coordinates relative to the min corner."""
    origin = positions.min(axis=0)
    return np.floor((positions - origin) / cell_size).astype(np.int64)


def _group_by_voxel(positions: np.ndarray, cell_size: float):
    """Group points by voxel.

    Returns (order, starts, inverse): `order` sorts points voxel-by-voxel,
    `starts` marks group boundaries in the sorted arrays, and `inverse` maps
    each original point to its voxel's group index. Group indexing follows
    the lexicographic order of integer voxel coordinates, which makes every
    downstream id assignment deterministic.
    """
    keys = _voxel_keys(positions, cell_size)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sk = keys[order]
    boundary = np.empty(len(sk), dtype=bool)
    boundary[0] = True
    boundary[1:] = np.any(sk[1:] != sk[:-1], axis=1)
    starts = np.flatnonzero(boundary)
    group_of_sorted = np.cumsum(boundary) - 1
    inverse = np.empty(len(sk), dtype=np.int64)
    inverse[order] = group_of_sorted
    return order, starts, inverse


def _segment_mean(values: np.ndarray, order: np.ndarray, starts: np.ndarray,
                  counts: np.ndarray) -> np.ndarray:
    sums = np.add.reduceat(values[order], starts, axis=0)
    if values.ndim == 1:
        return sums / counts
    return sums / counts[:, None]


def _majority_per_group(labels: np.ndarray, inverse: np.ndarray,
                        n_groups: int, n_classes: int) -> np.ndarray:
    """Majority label per group; ties break to the smallest class id."""
    counts = np.zeros((n_groups, n_classes), dtype=np.int64)
    np.add.at(counts, (inverse, labels), 1)
    # argmax returns the first (= smallest) class id on ties
    return counts.argmax(axis=1)


def voxel_subsample(cloud: PointCloud, spec: VoxelGridSpec):
    """Replace the points of every occupied voxel by a single representative.

    The representative carries the centroid position, the mean of any
    radiometric channels, and the majority label (ties to the smallest class
    id). Returns the subsampled cloud and the index map sending each original
    point to its representative.
    """
    order, starts, inverse = _group_by_voxel(cloud.positions, spec.cell_size)
    counts = np.diff(np.append(starts, len(order)))
    n_groups = len(starts)

    positions = _segment_mean(cloud.positions, order, starts, counts)
    colors = None
    if cloud.colors is not None:
        colors = _segment_mean(cloud.colors, order, starts, counts)
    intensity = None
    if cloud.intensity is not None:
        intensity = _segment_mean(cloud.intensity, order, starts, counts)
    labels = None
    if cloud.labels is not None:
        labels = _majority_per_group(cloud.labels, inverse, n_groups,
                                     cloud.n_classes)
    kept = PointCloud(positions=positions, colors=colors, intensity=intensity,
                      labels=labels, n_classes=cloud.n_classes)
    return kept, inverse


def voxel_partition_baseline(cloud: PointCloud, spec: VoxelGridSpec) -> np.ndarray:
    """Baseline oversegmentation: each voxel is one superpoint.

    Returns the per-point component assignment with consecutive 0-based ids.
    """
    _, _, inverse = _group_by_voxel(cloud.positions, spec.cell_size)
    return inverse
