"""PLY reading and writing (ASCII and binary little-endian).

Only the vertex element is consumed. Positions are stored as doubles on
write so a write/read cycle preserves coordinates bit-for-bit; colors are
stored as 8-bit and therefore round-trip to 1/255 quantization.
"""

import numpy as np

from .cloud import PointCloud


class PlyParseError(ValueError):
    """Malformed PLY header or payload."""


_PLY_DTYPES = {
    "char": np.int8, "int8": np.int8,
    "uchar": np.uint8, "uint8": np.uint8,
    "short": np.int16, "int16": np.int16,
    "ushort": np.uint16, "uint16": np.uint16,
    "int": np.int32, "int32": np.int32,
    "uint": np.uint32, "uint32": np.uint32,
    "float": np.float32, "float32": np.float32,
    "double": np.float64, "float64": np.float64,
}

_FLOAT_NAMES = {"float", "float32", "double", "float64"}
_INT_NAMES = {"char", "int8", "uchar", "uint8", "short", "int16",
              "ushort", "uint16", "int", "int32", "uint", "uint32"}


def _parse_header(raw: bytes):
    """Parse the PLY header from raw file bytes.

    Returns (fmt, n_vertices, properties, payload_offset) where properties
    is a list of (name, type name) for the vertex element.
    """
    end_marker = b"end_header"
    idx = raw.find(end_marker)
    if idx < 0:
        raise PlyParseError("no end_header found")
    # payload starts after the end_header line's newline
    newline = raw.find(b"\n", idx)
    if newline < 0:
        raise PlyParseError("end_header line is not terminated")
    header_text = raw[:newline].decode("ascii", errors="replace")
    payload_offset = newline + 1

    lines = header_text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PlyParseError("line 1: missing 'ply' magic")

    fmt = None
    n_vertices = None
    properties = []
    in_vertex = False
    seen_vertex = False
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii",
                                                    "binary_little_endian"):
                raise PlyParseError(
                    f"line {lineno}: unsupported format "
                    f"{tokens[1] if len(tokens) > 1 else '<missing>'!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyParseError(f"line {lineno}: malformed element line")
            if tokens[1] == "vertex":
                try:
                    n_vertices = int(tokens[2])
                except ValueError:
                    raise PlyParseError(
                        f"line {lineno}: bad vertex count {tokens[2]!r}")
                in_vertex = True
                seen_vertex = True
            else:
                if not seen_vertex:
                    raise PlyParseError(
                        f"line {lineno}: element {tokens[1]!r} precedes the "
                        "vertex element; only vertex-first files are supported")
                in_vertex = False
        elif tokens[0] == "property":
            if not in_vertex:
                continue  # properties of trailing elements are not consumed
            if len(tokens) >= 2 and tokens[1] == "list":
                raise PlyParseError(
                    f"line {lineno}: list properties are not supported in "
                    "the vertex element")
            if len(tokens) != 3:
                raise PlyParseError(f"line {lineno}: malformed property line")
            if tokens[1] not in _PLY_DTYPES:
                raise PlyParseError(
                    f"line {lineno}: unsupported property type {tokens[1]!r}")
            properties.append((tokens[2], tokens[1]))
        elif tokens[0] == "end_header":
            break
        else:
            raise PlyParseError(
                f"line {lineno}: unrecognized keyword {tokens[0]!r}")

    if fmt is None:
        raise PlyParseError("header has no format line")
    if n_vertices is None:
        raise PlyParseError("header has no vertex element")
    return fmt, n_vertices, properties, payload_offset


def read_ply(path) -> PointCloud:
    """Read a PLY file into a PointCloud.

    Recognized vertex properties: x/y/z (float or double, required),
    red/green/blue (8-bit, rescaled to [0,1]), intensity (float), and
    label or class (integer). Anything else is skipped.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    fmt, n_vertices, properties, offset = _parse_header(raw)

    names = [name for name, _ in properties]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise PlyParseError(f"vertex element lacks property {axis!r}")
        tname = dict(properties)[axis]
        if tname not in _FLOAT_NAMES:
            raise PlyParseError(f"property {axis!r} must be float typed, "
                                f"got {tname!r}")
    if n_vertices == 0:
        raise ValueError("empty cloud: vertex count is 0")

    if fmt == "binary_little_endian":
        dtype = np.dtype([(name, np.dtype(_PLY_DTYPES[t]).newbyteorder("<"))
                          for name, t in properties])
        needed = n_vertices * dtype.itemsize
        if len(raw) - offset < needed:
            raise PlyParseError(
                f"payload truncated: need {needed} bytes, "
                f"have {len(raw) - offset}")
        table = np.frombuffer(raw, dtype=dtype, count=n_vertices,
                              offset=offset)
    else:
        text = raw[offset:].decode("ascii", errors="replace")
        rows = text.splitlines()
        if len(rows) < n_vertices:
            raise PlyParseError(
                f"payload truncated: need {n_vertices} rows, "
                f"have {len(rows)}")
        try:
            values = np.array(
                [row.split() for row in rows[:n_vertices]], dtype=np.float64)
        except ValueError:
            raise PlyParseError("non-numeric or ragged ASCII vertex row")
        if values.shape[1] != len(properties):
            raise PlyParseError(
                f"vertex rows have {values.shape[1]} columns, header "
                f"declares {len(properties)}")
        table = {name: values[:, i] for i, (name, _) in enumerate(properties)}

    def col(name):
        return np.asarray(table[name], dtype=np.float64)

    positions = np.column_stack([col("x"), col("y"), col("z")])
    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        colors = np.column_stack(
            [col("red"), col("green"), col("blue")]) / 255.0
    intensity = col("intensity") if "intensity" in names else None
    labels = None
    label_key = "label" if "label" in names else (
        "class" if "class" in names else None)
    if label_key is not None:
        labels = np.asarray(table[label_key], dtype=np.int64)
    return PointCloud(positions=positions, colors=colors,
                      intensity=intensity, labels=labels)


def write_ply(path, cloud: PointCloud, binary: bool = True) -> None:
    """Write a PointCloud to PLY.

    Positions are written as doubles, colors as uchar (scaled by 255),
    intensity as float32, labels as int32.
    """
    fields = [("x", "double"), ("y", "double"), ("z", "double")]
    if cloud.colors is not None:
        fields += [("red", "uchar"), ("green", "uchar"), ("blue", "uchar")]
    if cloud.intensity is not None:
        fields += [("intensity", "float")]
    if cloud.labels is not None:
        fields += [("label", "int")]

    n = cloud.n_points
    header = ["ply",
              "format binary_little_endian 1.0" if binary
              else "format ascii 1.0",
              f"element vertex {n}"]
    header += [f"property {t} {name}" for name, t in fields]
    header += ["end_header"]

    dtype = np.dtype([(name, np.dtype(_PLY_DTYPES[t]).newbyteorder("<"))
                      for name, t in fields])
    table = np.empty(n, dtype=dtype)
    table["x"], table["y"], table["z"] = (cloud.positions[:, 0],
                                          cloud.positions[:, 1],
                                          cloud.positions[:, 2])
    if cloud.colors is not None:
        rgb = np.clip(np.rint(cloud.colors * 255.0), 0, 255).astype(np.uint8)
        table["red"], table["green"], table["blue"] = (rgb[:, 0], rgb[:, 1],
                                                       rgb[:, 2])
    if cloud.intensity is not None:
        table["intensity"] = cloud.intensity.astype(np.float32)
    if cloud.labels is not None:
        table["label"] = cloud.labels.astype(np.int32)

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(table.tobytes())
        else:
            cols = []
            for name, t in fields:
                if t in _FLOAT_NAMES:
                    cols.append([np.format_float_positional(
                        v, trim="0", unique=True) for v in table[name]])
                else:
                    cols.append([str(int(v)) for v in table[name]])
            rows = ("\n".join(" ".join(row) for row in zip(*cols)) + "\n")
            fh.write(rows.encode("ascii"))
