"""Synthetic labeled scenes built from geometric primitives.

A scene spec is a plain text file with one section per primitive; sections
may repeat. Lines are ``key = value`` with ``#`` comments. Vectors are
whitespace-separated numbers.

    [plane]                  # rectangle spanned by u and v from origin
    class = 0
    origin = 0 0 0
    u = 4 0 0
    v = 0 4 0
    density = 1000           # points per square meter
    color = 0.7 0.7 0.7      # rgb in [0,1]
    noise = 0.005            # isotropic gaussian sigma in meters
    intensity = 0.5          # optional constant channel

    [box]                    # axis-aligned box, all 6 faces sampled
    class = 1
    center = 1 1 0.25
    size = 0.5 0.5 0.5
    density = 1000
    color = 0.8 0.2 0.2
    noise = 0.005

    [cylinder]               # lateral surface, axis +z from base center
    class = 2
    center = 3 3 0
    radius = 0.3
    height = 1.0
    density = 1000
    color = 0.2 0.2 0.8
    noise = 0.005

Point counts are deterministic: every sampled patch contributes exactly
round(density * area) points placed by stratified jitter, so a fixed seed
reproduces the cloud bit for bit.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cloud import PointCloud


@dataclass
class Primitive:
    kind: str
    class_id: int
    density: float
    color: np.ndarray
    noise: float = 0.0
    intensity: Optional[float] = None
    # plane
    origin: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    # box
    center: Optional[np.ndarray] = None
    size: Optional[np.ndarray] = None
    # cylinder
    radius: Optional[float] = None
    height: Optional[float] = None


@dataclass
class SceneSpec:
    primitives: list = field(default_factory=list)

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("scene spec lists no primitives")


_REQUIRED = {
    "plane": ("origin", "u", "v"),
    "box": ("center", "size"),
    "cylinder": ("center", "radius", "height"),
}
_VECTOR_KEYS = {"origin", "u", "v", "center", "size", "color"}
_SCALAR_KEYS = {"density", "noise", "radius", "height", "intensity"}


def parse_scene_spec(text: str) -> SceneSpec:
    primitives = []
    current = None

    def close(prim):
        if prim is None:
            return
        kind = prim["kind"]
        for key in _REQUIRED[kind] + ("class", "density"):
            if key not in prim:
                raise ValueError(f"[{kind}] section missing key {key!r}")
        primitives.append(Primitive(
            kind=kind,
            class_id=int(prim["class"]),
            density=float(prim["density"]),
            color=np.asarray(prim.get("color", (0.5, 0.5, 0.5))),
            noise=float(prim.get("noise", 0.0)),
            intensity=prim.get("intensity"),
            origin=prim.get("origin"), u=prim.get("u"), v=prim.get("v"),
            center=prim.get("center"), size=prim.get("size"),
            radius=prim.get("radius"), height=prim.get("height"),
        ))

    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            close(current)
            kind = line[1:-1].strip().lower()
            if kind not in _REQUIRED:
                raise ValueError(f"line {lineno}: unknown primitive {kind!r}")
            current = {"kind": kind}
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        if current is None:
            raise ValueError(f"line {lineno}: key outside any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "class":
            current[key] = int(value)
        elif key in _VECTOR_KEYS:
            current[key] = np.array([float(t) for t in value.split()])
        elif key in _SCALAR_KEYS:
            current[key] = float(value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    close(current)
    return SceneSpec(primitives=primitives)


def load_scene_spec(path) -> SceneSpec:
    with open(path) as fh:
        return parse_scene_spec(fh.read())


def _stratified_unit_square(n: int, rng) -> np.ndarray:
    """Exactly n jittered points in [0,1]^2 on a near-square cell grid."""
    if n <= 0:
        return np.empty((0, 2))
    nx = max(1, math.ceil(math.sqrt(n)))
    ny = max(1, math.ceil(n / nx))
    cells = rng.permutation(nx * ny)[:n]
    jitter = rng.uniform(0.0, 1.0, (n, 2))
    s = (cells % nx + jitter[:, 0]) / nx
    t = (cells // nx + jitter[:, 1]) / ny
    return np.column_stack([s, t])


def _sample_patch(origin, eu, ev, density, rng) -> np.ndarray:
    """Sample a parallelogram patch at the requested density."""
    area = float(np.linalg.norm(np.cross(eu, ev)))
    n = int(round(density * area))
    st = _stratified_unit_square(n, rng)
    return origin + st[:, :1] * eu + st[:, 1:] * ev


def _patch_areas(prim: Primitive) -> list:
    """Areas of the independently sampled patches of one primitive."""
    if prim.kind == "plane":
        return [float(np.linalg.norm(np.cross(prim.u, prim.v)))]
    if prim.kind == "box":
        return [float(np.linalg.norm(np.cross(eu, ev)))
                for _, eu, ev in _box_faces(prim.center, prim.size)]
    if prim.kind == "cylinder":
        return [2.0 * math.pi * prim.radius * prim.height]
    raise ValueError(f"unknown primitive kind {prim.kind!r}")


def estimate_point_count(spec: SceneSpec, density_scale: float = 1.0) -> int:
    """Point count synth_scene would produce: each patch rounds its own
    density * area, so this mirrors the sampler patch by patch."""
    return sum(int(round(p.density * density_scale * area))
               for p in spec.primitives for area in _patch_areas(p))


def scale_for_total(spec: SceneSpec, total: int) -> float:
    """Density multiplier putting the scene near `total` points."""
    base = estimate_point_count(spec)
    if base == 0:
        raise ValueError("scene produces no points at its base densities")
    return total / base


def _box_faces(center, size):
    c = np.asarray(center, dtype=np.float64)
    s = np.asarray(size, dtype=np.float64) / 2.0
    ex, ey, ez = (np.array([size[0], 0, 0]), np.array([0, size[1], 0]),
                  np.array([0, 0, size[2]]))
    lo = c - s
    hi = c + s
    return [
        (lo, ex, ey), (np.array([lo[0], lo[1], hi[2]]), ex, ey),  # z faces
        (lo, ex, ez), (np.array([lo[0], hi[1], lo[2]]), ex, ez),  # y faces
        (lo, ey, ez), (np.array([hi[0], lo[1], lo[2]]), ey, ez),  # x faces
    ]


def _sample_primitive(prim: Primitive, rng, scale: float) -> np.ndarray:
    density = prim.density * scale
    if prim.kind == "plane":
        return _sample_patch(prim.origin, prim.u, prim.v, density, rng)
    if prim.kind == "box":
        parts = [_sample_patch(o, eu, ev, density, rng)
                 for o, eu, ev in _box_faces(prim.center, prim.size)]
        return np.concatenate(parts, axis=0)
    if prim.kind == "cylinder":
        area = 2.0 * math.pi * prim.radius * prim.height
        n = int(round(density * area))
        st = _stratified_unit_square(n, rng)
        theta = 2.0 * math.pi * st[:, 0]
        z = prim.height * st[:, 1]
        return np.column_stack([
            prim.center[0] + prim.radius * np.cos(theta),
            prim.center[1] + prim.radius * np.sin(theta),
            prim.center[2] + z,
        ])
    raise ValueError(f"unknown primitive kind {prim.kind!r}")


def synth_scene(seed: int, spec: SceneSpec,
                density_scale: float = 1.0) -> PointCloud:
    """Generate a labeled cloud from a scene spec; deterministic per seed.

    `density_scale` multiplies every primitive's density, e.g. to hit a
    target point count via scale_for_total.
    """
    rng = np.random.default_rng(seed)
    positions, colors, labels, intensities = [], [], [], []
    with_intensity = any(p.intensity is not None for p in spec.primitives)
    for prim in spec.primitives:
        pts = _sample_primitive(prim, rng, density_scale)
        if prim.noise > 0:
            pts = pts + rng.normal(0.0, prim.noise, pts.shape)
        positions.append(pts)
        colors.append(np.tile(prim.color, (len(pts), 1)))
        labels.append(np.full(len(pts), prim.class_id, dtype=np.int64))
        if with_intensity:
            value = 0.0 if prim.intensity is None else float(prim.intensity)
            intensities.append(np.full(len(pts), value))
    return PointCloud(
        positions=np.concatenate(positions, axis=0),
        colors=np.concatenate(colors, axis=0),
        intensity=np.concatenate(intensities) if with_intensity else None,
        labels=np.concatenate(labels),
    )
