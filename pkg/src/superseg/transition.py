"""Pairwise affinity and the contrastive transition loss.

The affinity of two embeddings is a(p,q) = exp(-||f_p - f_q|| / tau). The
loss pushes same-class neighbors together and different-class neighbors
apart:

    L = sum_intra -log a(p,q)  +  sum_inter -log(1 - a(p,q))

Intra edges are subsampled so they make up at most a rho_intra fraction of
the kept edge set; inter edges (the class boundaries) are always kept.

The gradient is analytic. With d = ||f_p - f_q|| and u = (f_p - f_q)/d:
intra edges contribute u/tau to f_p (and -u/tau to f_q); inter edges
contribute -(a/(1-a)) * u/tau to f_p (negated on f_q). Zero-distance intra
edges contribute nothing (the singularity is removable); inter affinities
are clamped below 1 and the clamp count is reported.
"""

from dataclasses import dataclass, field

import numpy as np

CLAMP_EPS = 1e-12


@dataclass
class TransitionConfig:
    tau: float = 1.0
    rho_intra: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (self.tau > 0):
            raise ValueError("tau must be positive")
        if not (0 < self.rho_intra <= 1):
            raise ValueError("rho_intra must lie in (0, 1]")


@dataclass
class SampledEdges:
    intra: np.ndarray  # (Ei, 2) node index pairs, same class
    inter: np.ndarray  # (Ee, 2) node index pairs, different class


@dataclass
class TransitionLoss:
    loss: float
    grad: np.ndarray
    n_clamped: int = 0


def affinity(f_p: np.ndarray, f_q: np.ndarray, tau: float = 1.0):
    """exp(-||f_p - f_q||/tau); accepts single vectors or (E, M) batches."""
    f_p = np.asarray(f_p, dtype=np.float64)
    f_q = np.asarray(f_q, dtype=np.float64)
    d = np.linalg.norm(np.atleast_2d(f_p) - np.atleast_2d(f_q), axis=1)
    a = np.exp(-d / tau)
    return float(a[0]) if f_p.ndim == 1 else a


def sample_edges(intra: np.ndarray, inter: np.ndarray,
                 cfg: TransitionConfig) -> SampledEdges:
    """Keep all inter edges; uniformly subsample intra edges so that
    |intra_kept| = min(|intra|, floor(rho * |inter| / (1 - rho))).

    With no inter edges at all (single-class scene) every intra edge is
    kept, since the quota would otherwise be meaningless.
    """
    intra = np.asarray(intra, dtype=np.int64).reshape(-1, 2)
    inter = np.asarray(inter, dtype=np.int64).reshape(-1, 2)
    if len(inter) == 0 or cfg.rho_intra >= 1.0:
        return SampledEdges(intra=intra, inter=inter)
    quota = int(np.floor(cfg.rho_intra * len(inter) / (1.0 - cfg.rho_intra)))
    n_keep = min(len(intra), quota)
    rng = np.random.default_rng(cfg.seed)
    chosen = np.sort(rng.choice(len(intra), size=n_keep, replace=False))
    return SampledEdges(intra=intra[chosen], inter=inter)


def _edge_distances(F, edges):
    diff = F[edges[:, 0]] - F[edges[:, 1]]
    return diff, np.sqrt(np.einsum("ij,ij->i", diff, diff))


def transition_loss(F: np.ndarray, sampled: SampledEdges,
                    cfg: TransitionConfig) -> TransitionLoss:
    """Loss and exact gradient of the contrastive objective over F."""
    F = np.asarray(F, dtype=np.float64)
    grad = np.zeros_like(F)
    loss = 0.0
    n_clamped = 0

    if len(sampled.intra):
        diff, d = _edge_distances(F, sampled.intra)
        loss += float(np.sum(d)) / cfg.tau
        live = d > 0.0  # zero-distance pairs contribute nothing
        if np.any(live):
            g = diff[live] / (cfg.tau * d[live, None])
            np.add.at(grad, sampled.intra[live, 0], g)
            np.add.at(grad, sampled.intra[live, 1], -g)

    if len(sampled.inter):
        diff, d = _edge_distances(F, sampled.inter)
        a = np.exp(-d / cfg.tau)
        clamped = a > 1.0 - CLAMP_EPS
        n_clamped = int(np.count_nonzero(clamped))
        a = np.minimum(a, 1.0 - CLAMP_EPS)
        loss += float(np.sum(-np.log1p(-a)))
        live = d > 0.0  # coincident pairs have no defined direction
        if np.any(live):
            coef = -(a[live] / (1.0 - a[live])) / (cfg.tau * d[live])
            g = diff[live] * coef[:, None]
            np.add.at(grad, sampled.inter[live, 0], g)
            np.add.at(grad, sampled.inter[live, 1], -g)

    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite transition loss or gradient")
    return TransitionLoss(loss=loss, grad=grad, n_clamped=n_clamped)
