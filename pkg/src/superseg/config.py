"""Run configuration: config-file parsing, flag merging, seed splitting.

Config files are plain text with one [section] per module:

    [run]
    seed = 1
    voxel_size = 0.03

    [graph]
    k = 8

    [features]
    neighborhood_k = 16
    channels = linearity, planarity, scattering, verticality, elevation

    [transition]
    tau = 1.0
    rho_intra = 0.1

    [partition]
    lambda = 0.02
    min_sizes = 5, 30, 90

Command-line flags override file values, which override defaults. The
fully resolved configuration can be echoed back in the same format so a
run is reproducible from its artifacts alone.
"""

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .features import FeatureConfig
from .graph import GraphConfig
from .partition import PartitionConfig
from .transition import TransitionConfig

_SECTIONS = ("run", "graph", "features", "transition", "partition")

_RUN_KEYS = ("input", "output", "seed", "threads", "voxel_size", "format",
             "embeddings")
_SECTION_KEYS = {
    "run": _RUN_KEYS,
    "graph": ("k",),
    "features": ("neighborhood_k", "channels", "normalize"),
    "transition": ("tau", "rho_intra"),
    "partition": ("lambda", "min_sizes", "knn_reconnect"),
}


def seed_for(seed: int, label: str) -> int:
    """Derive a module seed from the run seed and a fixed label."""
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1),
                                 zlib.crc32(label.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def parse_config_text(text: str) -> dict:
    """Sections of key=value pairs; unknown sections or keys are errors."""
    values = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ValueError(f"line {lineno}: malformed section header")
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ValueError(f"line {lineno}: unknown section "
                                 f"[{section}]")
            values.setdefault(section, {})
            continue
        if section is None:
            raise ValueError(f"line {lineno}: key outside any [section]")
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SECTION_KEYS[section]:
            raise ValueError(f"line {lineno}: unknown key {key!r} in "
                             f"[{section}]")
        values[section][key] = value.strip()
    return values


def load_config_file(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _parse_int_list(value) -> tuple:
    if isinstance(value, (tuple, list)):
        return tuple(int(v) for v in value)
    parts = [p for p in value.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected a comma-separated integer list")
    return tuple(int(p) for p in parts)


def _parse_str_list(value) -> tuple:
    if isinstance(value, (tuple, list)):
        return tuple(value)
    return tuple(p for p in value.replace(",", " ").split() if p)


@dataclass
class RunConfig:
    input: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0
    threads: int = 1
    voxel_size: Optional[float] = None
    format: str = "csv"
    embeddings: Optional[str] = None
    graph: GraphConfig = field(default_factory=GraphConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    lam: float = 0.02
    min_sizes: tuple = (5, 30, 90)
    knn_reconnect: int = 8

    def __post_init__(self):
        if self.format not in ("csv", "bin"):
            raise ValueError(f"format must be csv or bin, got "
                             f"{self.format!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.voxel_size is not None and not (self.voxel_size > 0):
            raise ValueError("voxel_size must be positive")
        if not self.min_sizes:
            raise ValueError("need at least one partition level")
        if any(m < 1 for m in self.min_sizes):
            raise ValueError("every min size must satisfy sigma_min >= 1")

    def partition_levels(self) -> list:
        """One PartitionConfig per level, seeds split by level label."""
        return [PartitionConfig(lam=self.lam, sigma_min=int(m),
                                knn_reconnect=self.knn_reconnect,
                                seed=seed_for(self.seed,
                                              f"partition.level{i}"))
                for i, m in enumerate(self.min_sizes)]


def build_run_config(file_values: Optional[dict] = None,
                     **flags) -> RunConfig:
    """Resolve defaults <- config file <- flags (rightmost wins).

    Flag names use the config key names; a flag explicitly set to None is
    treated as absent.
    """
    merged = {sec: dict(vals) for sec, vals in (file_values or {}).items()}
    flag_sections = {key: sec for sec, keys in _SECTION_KEYS.items()
                     for key in keys}
    for key, value in flags.items():
        if value is None:
            continue
        if key not in flag_sections:
            raise ValueError(f"unknown config key {key!r}")
        merged.setdefault(flag_sections[key], {})[key] = value

    run = merged.get("run", {})
    graph = merged.get("graph", {})
    feats = merged.get("features", {})
    trans = merged.get("transition", {})
    part = merged.get("partition", {})

    feature_kwargs = {}
    if "neighborhood_k" in feats:
        feature_kwargs["neighborhood_k"] = int(feats["neighborhood_k"])
    if "channels" in feats:
        feature_kwargs["channels"] = _parse_str_list(feats["channels"])
    if "normalize" in feats:
        value = feats["normalize"]
        feature_kwargs["normalize"] = (value if isinstance(value, bool)
                                       else _parse_bool(value))

    seed = int(run.get("seed", 0))
    transition_kwargs = {"seed": seed_for(seed, "transition")}
    if "tau" in trans:
        transition_kwargs["tau"] = float(trans["tau"])
    if "rho_intra" in trans:
        transition_kwargs["rho_intra"] = float(trans["rho_intra"])

    kwargs = dict(
        input=run.get("input"),
        output=run.get("output"),
        seed=seed,
        threads=int(run.get("threads", 1)),
        format=run.get("format", "csv"),
        embeddings=run.get("embeddings"),
        graph=GraphConfig(k=int(graph["k"])) if "k" in graph
        else GraphConfig(),
        features=FeatureConfig(**feature_kwargs),
        transition=TransitionConfig(**transition_kwargs),
    )
    if "voxel_size" in run and run["voxel_size"] is not None:
        kwargs["voxel_size"] = float(run["voxel_size"])
    if "lambda" in part:
        kwargs["lam"] = float(part["lambda"])
    if "min_sizes" in part:
        kwargs["min_sizes"] = _parse_int_list(part["min_sizes"])
    if "knn_reconnect" in part:
        kwargs["knn_reconnect"] = int(part["knn_reconnect"])
    return RunConfig(**kwargs)


def effective_config_text(cfg: RunConfig) -> str:
    """The resolved configuration in config-file syntax, deterministic
    (no timestamps, fixed key order) so artifacts diff cleanly."""
    lines = ["[run]"]
    for key in ("input", "output"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {value}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"threads = {cfg.threads}")
    if cfg.voxel_size is not None:
        lines.append(f"voxel_size = {cfg.voxel_size:g}")
    lines.append(f"format = {cfg.format}")
    if cfg.embeddings is not None:
        lines.append(f"embeddings = {cfg.embeddings}")
    lines += ["", "[graph]", f"k = {cfg.graph.k}"]
    lines += ["", "[features]",
              f"neighborhood_k = {cfg.features.neighborhood_k}",
              f"channels = {', '.join(cfg.features.channels)}",
              f"normalize = {str(cfg.features.normalize).lower()}"]
    lines += ["", "[transition]", f"tau = {cfg.transition.tau:g}",
              f"rho_intra = {cfg.transition.rho_intra:g}"]
    lines += ["", "[partition]", f"lambda = {cfg.lam:g}",
              f"min_sizes = {', '.join(str(m) for m in cfg.min_sizes)}",
              f"knn_reconnect = {cfg.knn_reconnect}"]
    return "\n".join(lines) + "\n"


def write_sidecar(output_path, cfg: RunConfig) -> str:
    """Echo the effective config next to an output artifact."""
    sidecar = str(output_path) + ".config"
    with open(sidecar, "w") as fh:
        fh.write(effective_config_text(cfg))
    return sidecar
