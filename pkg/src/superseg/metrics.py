"""Oversegmentation quality and throughput reporting.

Oracle mIoU scores a partition by the best any per-superpoint classifier
could do: every superpoint predicts its majority ground-truth label, and
the resulting labeling is compared to the ground truth with the standard
per-class intersection-over-union. It is an upper bound, not a model
score.
"""

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import AdjacencyGraph
from .partition import PartitionConfig, greedy_partition


@dataclass
class OracleReport:
    n_superpoints: int
    oracle_miou: float            # percent, mean over classes present
    per_class_iou: np.ndarray     # (C,) percent; vacuous classes read 100
    majority_labels: np.ndarray   # (n_superpoints,) class ids
    class_present: np.ndarray     # (C,) bool, in ground truth or prediction

    def to_csv_row(self) -> str:
        ious = ",".join(f"{v:.4f}" for v in self.per_class_iou)
        return f"{self.n_superpoints},{self.oracle_miou:.4f},{ious}"

    @staticmethod
    def csv_header(n_classes: int) -> str:
        ious = ",".join(f"iou_{c}" for c in range(n_classes))
        return f"n_superpoints,oracle_miou,{ious}"


def majority_labels(assignment: np.ndarray, labels: np.ndarray,
                    n_classes: int) -> np.ndarray:
    """Majority ground-truth label per superpoint, ties to the smaller
    class id. Superpoint ids must be consecutive from 0."""
    assignment = np.asarray(assignment, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    n_super = int(assignment.max()) + 1
    counts = np.zeros((n_super, n_classes), dtype=np.int64)
    np.add.at(counts, (assignment, labels), 1)
    if np.any(counts.sum(axis=1) == 0):
        raise ValueError("superpoint ids must be consecutive with no gaps")
    return counts.argmax(axis=1)


def oracle_miou(assignment: np.ndarray, labels: np.ndarray,
                n_classes: int) -> OracleReport:
    """Score a partition by its majority-label upper bound.

    Classes absent from both ground truth and prediction are excluded from
    the mean (their per-class entry reads 100 so every entry stays in
    [0, 100]).
    """
    if n_classes < 1:
        raise ValueError("n_classes must be at least 1")
    assignment = np.asarray(assignment, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(assignment) != len(labels):
        raise ValueError("assignment and labels must have equal length")
    if len(labels) == 0:
        raise ValueError("cannot score an empty cloud")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("labels out of range for n_classes")

    majority = majority_labels(assignment, labels, n_classes)
    predicted = majority[assignment]
    confusion = np.bincount(labels * n_classes + predicted,
                            minlength=n_classes * n_classes)
    confusion = confusion.reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = tp + fp + fn
    present = denom > 0
    iou = np.full(n_classes, 100.0)
    iou[present] = 100.0 * tp[present] / denom[present]
    return OracleReport(n_superpoints=len(majority),
                        oracle_miou=float(iou[present].mean()),
                        per_class_iou=iou,
                        majority_labels=majority,
                        class_present=present)


@dataclass
class CurvePoint:
    grid_value: float
    n_superpoints: int
    oracle_miou: float
    per_class_iou: np.ndarray


def purity_curve(cloud, F: np.ndarray, graph: AdjacencyGraph,
                 lambda_grid=None, sigma_grid=None,
                 base_cfg: Optional[PartitionConfig] = None) -> list:
    """One greedy partition per grid value, scored by oracle mIoU.

    Exactly one of lambda_grid / sigma_grid sweeps; the other parameter is
    held at base_cfg. Rows come back sorted by superpoint count.
    """
    if (lambda_grid is None) == (sigma_grid is None):
        raise ValueError("pass exactly one of lambda_grid or sigma_grid")
    if cloud.labels is None:
        raise ValueError("purity curve needs ground-truth labels")
    base_cfg = base_cfg or PartitionConfig()
    grid = lambda_grid if lambda_grid is not None else sigma_grid
    rows = []
    for value in grid:
        if lambda_grid is not None:
            cfg = PartitionConfig(lam=float(value),
                                  sigma_min=base_cfg.sigma_min,
                                  knn_reconnect=base_cfg.knn_reconnect,
                                  seed=base_cfg.seed)
        else:
            cfg = PartitionConfig(lam=base_cfg.lam, sigma_min=int(value),
                                  knn_reconnect=base_cfg.knn_reconnect,
                                  seed=base_cfg.seed)
        part = greedy_partition(F, graph, cloud.positions, cfg)
        report = oracle_miou(part.assignment, cloud.labels, cloud.n_classes)
        rows.append(CurvePoint(grid_value=float(value),
                               n_superpoints=report.n_superpoints,
                               oracle_miou=report.oracle_miou,
                               per_class_iou=report.per_class_iou))
    rows.sort(key=lambda r: r.n_superpoints)
    return rows


def purity_curve_csv(rows: list, n_classes: int) -> str:
    out = io.StringIO()
    ious = ",".join(f"iou_{c}" for c in range(n_classes))
    out.write(f"grid_value,n_superpoints,oracle_miou,{ious}\n")
    for r in rows:
        ious = ",".join(f"{v:.4f}" for v in r.per_class_iou)
        out.write(f"{r.grid_value:.6g},{r.n_superpoints},"
                  f"{r.oracle_miou:.4f},{ious}\n")
    return out.getvalue()


# one timer tick at the resolution we report with
_MIN_ELAPSED = 1e-9


@dataclass
class StageRow:
    name: str
    seconds: float
    points_per_second: Optional[float]  # None when below timer resolution


@dataclass
class ThroughputReport:
    n_points: int
    stages: list
    end_to_end: StageRow
    stage_sum_mismatch: bool = False
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("stage,seconds,points_per_second\n")
        for row in self.stages + [self.end_to_end]:
            pps = ("<min resolution" if row.points_per_second is None
                   else f"{row.points_per_second:.1f}")
            out.write(f"{row.name},{row.seconds:.6f},{pps}\n")
        return out.getvalue()

    def to_text(self) -> str:
        width = max(len(r.name) for r in self.stages + [self.end_to_end])
        lines = [f"{'stage':<{width}}  {'seconds':>10}  {'pts/s':>14}"]
        for row in self.stages + [self.end_to_end]:
            pps = ("<min resolution" if row.points_per_second is None
                   else f"{row.points_per_second:,.0f}")
            lines.append(f"{row.name:<{width}}  {row.seconds:>10.3f}  "
                         f"{pps:>14}")
        for note in self.notes:
            lines.append(f"! {note}")
        return "\n".join(lines)


def throughput_report(stage_timings: dict, n_points: int,
                      end_to_end: Optional[float] = None
                      ) -> ThroughputReport:
    """Points/second per pipeline stage.

    `stage_timings` maps stage name to elapsed seconds in pipeline order
    (dict order is kept). When `end_to_end` is omitted the stage sum
    stands in; when given, a stage sum differing from it by more than 10%
    is flagged.
    """
    def row(name, seconds):
        if seconds < _MIN_ELAPSED:
            return StageRow(name, seconds, None)
        return StageRow(name, seconds, n_points / seconds)

    stages = [row(name, float(sec)) for name, sec in stage_timings.items()]
    total = sum(r.seconds for r in stages)
    notes = []
    mismatch = False
    if end_to_end is None:
        end_to_end = total
    elif end_to_end > 0 and abs(total - end_to_end) > 0.1 * end_to_end:
        mismatch = True
        notes.append(f"stage sum {total:.3f}s differs from end-to-end "
                     f"{end_to_end:.3f}s by more than 10%")
    return ThroughputReport(n_points=n_points, stages=stages,
                            end_to_end=row("end_to_end", float(end_to_end)),
                            stage_sum_mismatch=mismatch, notes=notes)
