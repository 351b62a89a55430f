"""Per-point embeddings: handcrafted geometric features and an optional
linear map fit with the transition loss.

The geometric channels come from the eigenvalues l1 >= l2 >= l3 >= 0 of
each point's k-neighborhood covariance (the point itself included).
Writing si = sqrt(li):

    linearity   (s1 - s2) / s1
    planarity   (s2 - s3) / s1
    scattering  s3 / s1
    verticality |normal . z|, normal = eigenvector of l3
    elevation   z rescaled to [0, 1] over the cloud

all zero when the neighborhood covariance vanishes. Radiometric channels
(color, intensity) are appended when the cloud carries them; requesting
one the cloud lacks is not an error, the channel is skipped.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cloud import PointCloud
from .graph import AdjacencyGraph, knn_neighbors, split_edges_by_label
from .transition import SampledEdges, TransitionConfig, sample_edges, \
    transition_loss

KNOWN_CHANNELS = ("linearity", "planarity", "scattering", "verticality",
                  "elevation", "color", "intensity")

# rows per eigh batch; bounds the (chunk, k+1, 3) gather to a few hundred MB
_CHUNK = 131072


@dataclass
class FeatureConfig:
    neighborhood_k: int = 16
    channels: tuple = KNOWN_CHANNELS
    normalize: bool = True

    def __post_init__(self):
        if self.neighborhood_k < 3:
            raise ValueError("neighborhood_k must be at least 3")
        unknown = [c for c in self.channels if c not in KNOWN_CHANNELS]
        if unknown:
            raise ValueError(f"unknown feature channels: {unknown}")
        if not self.channels:
            raise ValueError("at least one channel must be enabled")


def _eigen_channels(positions: np.ndarray, neighbor_idx: np.ndarray):
    """(N, 4) columns linearity, planarity, scattering, verticality."""
    n = len(positions)
    out = np.zeros((n, 4))
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        rows = np.arange(start, stop)
        gathered = positions[neighbor_idx[rows]]           # (c, k, 3)
        pts = np.concatenate([positions[rows, None, :], gathered], axis=1)
        centered = pts - pts.mean(axis=1, keepdims=True)
        cov = np.einsum("cki,ckj->cij", centered, centered) / pts.shape[1]
        evals, evecs = np.linalg.eigh(cov)                 # ascending
        evals = np.maximum(evals, 0.0)
        s = np.sqrt(evals)
        s1, s2, s3 = s[:, 2], s[:, 1], s[:, 0]
        ok = s1 > 0
        safe = np.where(ok, s1, 1.0)
        out[rows, 0] = np.where(ok, (s1 - s2) / safe, 0.0)
        out[rows, 1] = np.where(ok, (s2 - s3) / safe, 0.0)
        out[rows, 2] = np.where(ok, s3 / safe, 0.0)
        out[rows, 3] = np.where(ok, np.abs(evecs[:, 2, 0]), 0.0)
    return out


def _relative_elevation(z: np.ndarray) -> np.ndarray:
    lo, hi = float(z.min()), float(z.max())
    if hi - lo < 1e-12:
        return np.zeros_like(z)
    return (z - lo) / (hi - lo)


def _minmax_columns(values: np.ndarray) -> np.ndarray:
    lo = values.min(axis=0)
    span = values.max(axis=0) - lo
    out = np.zeros_like(values)
    live = span > 1e-12
    out[:, live] = (values[:, live] - lo[live]) / span[live]
    return out


def geometric_features(cloud: PointCloud, cfg: Optional[FeatureConfig] = None,
                       threads: int = 1,
                       neighbor_idx: Optional[np.ndarray] = None
                       ) -> np.ndarray:
    """(N, M) feature matrix; channel order follows cfg.channels with
    color expanding to three columns.

    `neighbor_idx` reuses an existing neighbor query (>= neighborhood_k
    columns, self excluded); otherwise one is run here.
    """
    cfg = cfg or FeatureConfig()
    n = cloud.n_points
    if n <= cfg.neighborhood_k:
        raise ValueError(
            f"need more than neighborhood_k={cfg.neighborhood_k} points, "
            f"got {n}")

    eigen = None
    if any(c in cfg.channels for c in KNOWN_CHANNELS[:4]):
        if neighbor_idx is None:
            _, neighbor_idx = knn_neighbors(cloud.positions,
                                            cfg.neighborhood_k,
                                            threads=threads)
        elif neighbor_idx.shape[1] < cfg.neighborhood_k:
            raise ValueError("neighbor_idx has fewer columns than "
                             "neighborhood_k")
        eigen = _eigen_channels(cloud.positions,
                                neighbor_idx[:, :cfg.neighborhood_k])

    columns = []
    eigen_slot = {"linearity": 0, "planarity": 1, "scattering": 2,
                  "verticality": 3}
    for name in cfg.channels:
        if name in eigen_slot:
            columns.append(eigen[:, eigen_slot[name]])
        elif name == "elevation":
            columns.append(_relative_elevation(cloud.positions[:, 2]))
        elif name == "color" and cloud.colors is not None:
            columns.extend(cloud.colors.T)
        elif name == "intensity" and cloud.intensity is not None:
            columns.append(cloud.intensity)
    if not columns:
        raise ValueError("no enabled channel is available on this cloud")
    F = np.column_stack(columns).astype(np.float64)
    if cfg.normalize:
        F = _minmax_columns(F)
    if not np.all(np.isfinite(F)):
        raise FloatingPointError("non-finite feature values")
    return F


def fit_linear_embedding(features: np.ndarray, graph: AdjacencyGraph,
                         labels: np.ndarray, cfg: TransitionConfig,
                         steps: int = 200, lr: float = 0.05, seed: int = 0,
                         out_dim: Optional[int] = None,
                         history: Optional[list] = None):
    """Fit W by full-batch gradient descent on the transition loss of
    F = features @ W over class-balanced sampled edges.

    Returns (W, embeddings) for the best W seen, judged by the loss on the
    full unsampled edge set (the initialization is a candidate, so the
    returned loss never exceeds the initial one). When `history` is a
    list, one record per evaluation is appended.
    """
    features = np.asarray(features, dtype=np.float64)
    if labels is None:
        raise ValueError("labels are required to split intra/inter edges")
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(features):
        raise ValueError("labels length must match feature rows")
    m_in = features.shape[1]
    out_dim = m_in if out_dim is None else int(out_dim)

    intra, inter = split_edges_by_label(graph, labels)
    sampled = sample_edges(intra, inter, cfg)
    full = SampledEdges(intra=intra, inter=inter)

    rng = np.random.default_rng(seed)
    W = rng.standard_normal((m_in, out_dim)) / np.sqrt(m_in)

    def full_loss(weights):
        return transition_loss(features @ weights, full, cfg).loss

    best_W = W.copy()
    best_loss = full_loss(W)
    if history is not None:
        history.append({"step": 0, "sampled_loss": None,
                        "full_loss": best_loss})
    for step in range(1, steps + 1):
        try:
            tl = transition_loss(features @ W, sampled, cfg)
        except FloatingPointError as exc:
            raise RuntimeError(
                f"transition loss diverged at step {step}; "
                f"try a smaller lr than {lr}") from exc
        W = W - lr * (features.T @ tl.grad)
        if not np.all(np.isfinite(W)):
            raise RuntimeError(
                f"weights became non-finite at step {step}; "
                f"try a smaller lr than {lr}")
        try:
            current = full_loss(W)
        except FloatingPointError as exc:
            raise RuntimeError(
                f"transition loss diverged at step {step}; "
                f"try a smaller lr than {lr}") from exc
        if history is not None:
            history.append({"step": step, "sampled_loss": tl.loss,
                            "full_loss": current})
        if current < best_loss:
            best_loss = current
            best_W = W.copy()
    return best_W, features @ best_W
