"""Command-line surface.

Commands: partition, eval, fit, bench, synth. Exit codes: 0 ok, 2 I/O
failure, 3 invalid configuration or input values, 4 internal error.
All commands honor --seed and --threads; thread count never changes any
output, only wall time, and every output written next to --output gets a
sidecar echoing the fully resolved configuration.
"""

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import report
from .cloud import PointCloud, VoxelGridSpec, voxel_subsample
from .config import (RunConfig, build_run_config, load_config_file, seed_for,
                     write_sidecar)
from .energy import superpoint_stats
from .features import fit_linear_embedding, geometric_features
from .formats import (read_embeddings, read_partition, write_embeddings,
                      write_partition)
from .graph import build_knn_graph, knn_neighbors
from .metrics import OracleReport, oracle_miou, throughput_report
from .partition import _consecutive_ids, hierarchical_partition
from .ply_io import PlyParseError, read_ply, write_ply
from .synth import load_scene_spec, scale_for_total, synth_scene
from .transition import TransitionConfig

_SCENE_DIR = Path(__file__).parent / "scenes"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit 3 on bad usage instead of argparse's default 2 (reserved for I/O)
    def error(self, message):
        raise _UsageError(message)


def _resolve_scene(name_or_path: str) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = _SCENE_DIR / f"{name_or_path}.scene"
    if bundled.exists():
        return bundled
    names = sorted(p.stem for p in _SCENE_DIR.glob("*.scene"))
    raise FileNotFoundError(
        f"no scene file {name_or_path!r}; bundled scenes: {', '.join(names)}")


def _load_run_config(args, **extra) -> RunConfig:
    file_values = None
    if getattr(args, "config", None):
        file_values = load_config_file(args.config)
    flags = dict(
        input=getattr(args, "input", None),
        output=getattr(args, "output", None),
        seed=getattr(args, "seed", None),
        threads=getattr(args, "threads", None),
        voxel_size=getattr(args, "voxel_size", None),
        format=getattr(args, "format", None),
        embeddings=getattr(args, "embeddings", None),
        k=getattr(args, "k", None),
        channels=getattr(args, "features", None),
        tau=getattr(args, "tau", None),
        rho_intra=getattr(args, "rho_intra", None),
        min_sizes=getattr(args, "min_sizes", None),
    )
    flags["lambda"] = getattr(args, "lam", None)
    flags.update(extra)
    return build_run_config(file_values, **flags)


@dataclass
class PipelineResult:
    work: PointCloud                 # cloud the graph was built on
    inverse: Optional[np.ndarray]    # original point -> work point
    embeddings: np.ndarray
    hierarchy: object
    point_table: np.ndarray          # (N_original, L)
    level_stats: list                # point-level stats per level
    timings: dict                    # stage name -> seconds
    end_to_end: float


def _run_pipeline(cloud: PointCloud, cfg: RunConfig,
                  embeddings: Optional[np.ndarray] = None) -> PipelineResult:
    """raw points -> hierarchical superpoints, with per-stage timings."""
    timings = {}
    start = time.perf_counter()

    work, inverse = cloud, None
    if cfg.voxel_size is not None:
        t = time.perf_counter()
        work, inverse = voxel_subsample(cloud, VoxelGridSpec(cfg.voxel_size))
        timings["voxelize"] = time.perf_counter() - t

    # one neighbor query serves both the adjacency graph and the feature
    # neighborhoods; columns are (distance, index)-sorted so prefixes are
    # exact k-NN sets for any smaller k
    t = time.perf_counter()
    k_query = cfg.graph.k
    if embeddings is None:
        k_query = max(k_query, cfg.features.neighborhood_k)
    _, neighbor_idx = knn_neighbors(work.positions, k_query,
                                    threads=cfg.threads)
    graph = build_knn_graph(work, cfg.graph, threads=cfg.threads,
                            neighbor_idx=neighbor_idx[:, :cfg.graph.k])
    timings["knn"] = time.perf_counter() - t

    t = time.perf_counter()
    if embeddings is None:
        embeddings = geometric_features(work, cfg.features,
                                        threads=cfg.threads,
                                        neighbor_idx=neighbor_idx)
    elif len(embeddings) != work.n_points:
        raise ValueError(
            f"embeddings cover {len(embeddings)} points but the working "
            f"cloud has {work.n_points}")
    timings["point_features"] = time.perf_counter() - t

    t = time.perf_counter()
    hierarchy = hierarchical_partition(embeddings, graph, work.positions,
                                       cfg.partition_levels())
    timings["partition"] = time.perf_counter() - t

    t = time.perf_counter()
    table = hierarchy.point_assignments()
    if inverse is not None:
        table = table[inverse]
    level_stats = [superpoint_stats(embeddings,
                                    hierarchy.point_assignments()[:, level],
                                    work.positions)
                   for level in range(table.shape[1])]
    timings["superpoint_features"] = time.perf_counter() - t

    return PipelineResult(work=work, inverse=inverse, embeddings=embeddings,
                          hierarchy=hierarchy, point_table=table,
                          level_stats=level_stats, timings=timings,
                          end_to_end=time.perf_counter() - start)


def _default_output(input_path: str, suffix: str) -> str:
    return str(Path(input_path).with_suffix(suffix))


def cmd_partition(args) -> int:
    cfg = _load_run_config(args)
    if cfg.input is None:
        raise ValueError("partition requires --input")
    cloud = read_ply(cfg.input)

    embeddings = None
    if cfg.embeddings is not None:
        embeddings = read_embeddings(cfg.embeddings).astype(np.float64)
    result = _run_pipeline(cloud, cfg, embeddings)

    ext = ".partition.csv" if cfg.format == "csv" else ".partition.bin"
    output = cfg.output or _default_output(cfg.input, ext)
    write_partition(output, result.point_table, fmt=cfg.format)
    sidecar = write_sidecar(output, cfg)

    rep = throughput_report(result.timings, cloud.n_points,
                            result.end_to_end)
    print(rep.to_text())
    counts = [level.n_components for level in result.hierarchy.levels]
    print("superpoints per level: " + ", ".join(str(c) for c in counts))
    print(f"wrote {output}")
    print(f"wrote {sidecar}")
    return 0


def _report_figure_path(output: str) -> str:
    return str(Path(output).with_suffix(".png"))


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    if cfg.input is None or args.partition is None:
        raise ValueError("eval requires --input and --partition")
    cloud = read_ply(cfg.input)
    if cloud.labels is None:
        raise ValueError("eval needs ground-truth labels in the cloud")
    table = read_partition(args.partition)
    if len(table) != cloud.n_points:
        raise ValueError(
            f"partition covers {len(table)} points but the cloud has "
            f"{cloud.n_points}")

    reports = []
    for level in range(table.shape[1]):
        assignment = _consecutive_ids(table[:, level])
        reports.append(oracle_miou(assignment, cloud.labels,
                                   cloud.n_classes))

    print(OracleReport.csv_header(cloud.n_classes))
    for level, rep in enumerate(reports):
        print(f"level{level}," + rep.to_csv_row())
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write("level," + OracleReport.csv_header(cloud.n_classes)
                     + "\n")
            for level, rep in enumerate(reports):
                fh.write(f"level{level}," + rep.to_csv_row() + "\n")
        figure = _report_figure_path(cfg.output)
        report.save_iou_figure(figure, reports)
        sidecar = write_sidecar(cfg.output, cfg)
        print(f"wrote {cfg.output}")
        print(f"wrote {figure}")
        print(f"wrote {sidecar}")
    return 0


def cmd_fit(args) -> int:
    cfg = _load_run_config(args)
    if cfg.input is None:
        raise ValueError("fit requires --input")
    cloud = read_ply(cfg.input)
    if cloud.labels is None:
        raise ValueError("fit needs ground-truth labels in the cloud")

    work = cloud
    if cfg.voxel_size is not None:
        work, _ = voxel_subsample(cloud, VoxelGridSpec(cfg.voxel_size))
    k_query = max(cfg.graph.k, cfg.features.neighborhood_k)
    _, neighbor_idx = knn_neighbors(work.positions, k_query,
                                    threads=cfg.threads)
    graph = build_knn_graph(work, cfg.graph, threads=cfg.threads,
                            neighbor_idx=neighbor_idx[:, :cfg.graph.k])
    features = geometric_features(work, cfg.features, threads=cfg.threads,
                                  neighbor_idx=neighbor_idx)

    history = []
    W, embeddings = fit_linear_embedding(
        features, graph, work.labels, cfg.transition, steps=args.steps,
        lr=args.lr, seed=seed_for(cfg.seed, "fit.init"), history=history)

    output = cfg.output or _default_output(cfg.input, ".embeddings.bin")
    write_embeddings(output, embeddings)
    weights_path = output + ".weights.csv"
    np.savetxt(weights_path, W, delimiter=",")
    loss_path = output + ".loss.csv"
    with open(loss_path, "w") as fh:
        fh.write("step,sampled_loss,full_loss\n")
        for h in history:
            sampled = "" if h["sampled_loss"] is None \
                else f"{h['sampled_loss']:.9g}"
            fh.write(f"{h['step']},{sampled},{h['full_loss']:.9g}\n")
    figure = _report_figure_path(output)
    report.save_loss_figure(figure, history)
    sidecar = write_sidecar(output, cfg)

    print(f"initial loss {history[0]['full_loss']:.6g}, "
          f"best loss {min(h['full_loss'] for h in history):.6g} "
          f"over {args.steps} steps")
    for path in (output, weights_path, loss_path, figure, sidecar):
        print(f"wrote {path}")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_run_config(args)
    if cfg.input is not None:
        cloud = read_ply(cfg.input)
        source = cfg.input
    else:
        spec = load_scene_spec(_resolve_scene(args.scene))
        scale = scale_for_total(spec, args.n_points)
        cloud = synth_scene(seed_for(cfg.seed, "bench.scene"), spec,
                            density_scale=scale)
        source = f"scene {args.scene!r}"
    print(f"benchmarking on {source} ({cloud.n_points} points), "
          f"{args.repeats} repeats")

    runs = []
    counts = None
    for _ in range(args.repeats):
        result = _run_pipeline(cloud, cfg)
        runs.append((dict(result.timings), result.end_to_end))
        counts = [level.n_components for level in result.hierarchy.levels]
        rep = throughput_report(result.timings, cloud.n_points,
                                result.end_to_end)
        print(rep.to_text())
        print()

    stage_names = list(runs[0][0].keys())
    mean_timings = {name: float(np.mean([r[0][name] for r in runs]))
                    for name in stage_names}
    mean_total = float(np.mean([r[1] for r in runs]))
    print("mean of " + str(args.repeats) + " runs:")
    mean_rep = throughput_report(mean_timings, cloud.n_points, mean_total)
    print(mean_rep.to_text())
    print("superpoints per level: " + ", ".join(str(c) for c in counts))

    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write("stage,mean_s,min_s,max_s,mean_pts_per_s\n")
            for name in stage_names + ["end_to_end"]:
                if name == "end_to_end":
                    vals = [r[1] for r in runs]
                else:
                    vals = [r[0][name] for r in runs]
                mean = float(np.mean(vals))
                pps = cloud.n_points / mean if mean > 0 else 0.0
                fh.write(f"{name},{mean:.6f},{min(vals):.6f},"
                         f"{max(vals):.6f},{pps:.1f}\n")
        figure = _report_figure_path(cfg.output)
        report.save_stage_figure(figure, mean_rep)
        sidecar = write_sidecar(cfg.output, cfg)
        print(f"wrote {cfg.output}")
        print(f"wrote {figure}")
        print(f"wrote {sidecar}")
    return 0


def cmd_synth(args) -> int:
    cfg = _load_run_config(args)
    if cfg.output is None:
        raise ValueError("synth requires --output")
    spec = load_scene_spec(_resolve_scene(args.scene))
    scale = args.density_scale
    if args.n_points is not None:
        scale = scale_for_total(spec, args.n_points)
    cloud = synth_scene(cfg.seed, spec, density_scale=scale)
    write_ply(cfg.output, cloud, binary=not args.ascii)
    sidecar = write_sidecar(cfg.output, cfg)
    print(f"wrote {cfg.output} ({cloud.n_points} points, "
          f"{cloud.n_classes} classes)")
    print(f"wrote {sidecar}")
    return 0


def _min_sizes_flag(value: str) -> tuple:
    parts = [p for p in value.replace(",", " ").split() if p]
    try:
        sizes = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {value!r}")
    if not sizes:
        raise argparse.ArgumentTypeError("expected at least one size")
    return sizes


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--config", default=None,
                     help="key=value config file; flags override it")
    sub.add_argument("--output", default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="superseg",
                     description="superpoint oversegmentation toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("partition",
                            help="cloud -> hierarchical superpoints")
    _add_common(p)
    p.add_argument("--input", help="input PLY")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="contour regularization strength")
    p.add_argument("--k", type=int, default=None, help="k-NN graph degree")
    p.add_argument("--min-sizes", dest="min_sizes", type=_min_sizes_flag,
                   default=None, help="per-level minimal superpoint sizes")
    p.add_argument("--voxel-size", dest="voxel_size", type=float,
                   default=None)
    p.add_argument("--embeddings", default=None,
                   help="precomputed embeddings instead of features")
    p.add_argument("--features", default=None,
                   help="comma-separated handcrafted channel names")
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    p.set_defaults(func=cmd_partition)

    p = commands.add_parser("eval", help="score a partition by oracle mIoU")
    _add_common(p)
    p.add_argument("--input", help="labeled PLY the partition belongs to")
    p.add_argument("--partition", help="partition file from `partition`")
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("fit",
                            help="fit the linear embedding on labels")
    _add_common(p)
    p.add_argument("--input", help="labeled PLY")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--voxel-size", dest="voxel_size", type=float,
                   default=None)
    p.add_argument("--features", default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--rho-intra", dest="rho_intra", type=float,
                   default=None)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.set_defaults(func=cmd_fit)

    p = commands.add_parser("bench", help="time the pipeline end to end")
    _add_common(p)
    p.add_argument("--input", default=None,
                   help="PLY to bench on; omit to generate a scene")
    p.add_argument("--scene", default="bench",
                   help="bundled scene name or spec path for generation")
    p.add_argument("--n-points", dest="n_points", type=int,
                   default=1_000_000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--min-sizes", dest="min_sizes", type=_min_sizes_flag,
                   default=None)
    p.add_argument("--voxel-size", dest="voxel_size", type=float,
                   default=None)
    p.add_argument("--features", default=None)
    p.set_defaults(func=cmd_bench)

    p = commands.add_parser("synth", help="generate a labeled PLY")
    _add_common(p)
    p.add_argument("--scene", required=True,
                   help="bundled scene name or spec path")
    p.add_argument("--n-points", dest="n_points", type=int, default=None)
    p.add_argument("--density-scale", dest="density_scale", type=float,
                   default=1.0)
    p.add_argument("--ascii", action="store_true",
                   help="write ASCII PLY instead of binary")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    try:
        return args.func(args)
    except PlyParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
