"""On-disk formats for partitions, embeddings, and graph dumps.

Partition files come in two flavors:
  * CSV with header ``point_id,level0,level1,...`` and one row per point;
  * binary with a 16-byte header (magic ``SUPPART1``, u32 point count,
    u8 level count, 3 reserved zero bytes) followed by the N x L component
    ids as little-endian u32, row-major.

Embedding files are binary: magic ``SUPEMBD1``, u32 N, u32 M, then the
N x M matrix as little-endian f32, row-major.
"""

import struct

import numpy as np

PARTITION_MAGIC = b"SUPPART1"
EMBEDDING_MAGIC = b"SUPEMBD1"


def _as_level_table(hierarchy) -> np.ndarray:
    """Accept a HierarchicalPartition or a ready (N, L) id table."""
    table = getattr(hierarchy, "point_assignments", None)
    if callable(table):
        table = table()
    else:
        table = np.asarray(hierarchy)
    table = np.atleast_2d(np.asarray(table))
    if table.size == 0:
        raise ValueError("empty hierarchy: nothing to write")
    if table.min() < 0:
        raise ValueError("component ids must be non-negative")
    return table.astype(np.uint32)


def write_partition(path, hierarchy, fmt: str = "csv") -> None:
    """Write per-point component ids, one column per level."""
    table = _as_level_table(hierarchy)
    n, levels = table.shape
    if fmt == "csv":
        header = "point_id," + ",".join(f"level{i}" for i in range(levels))
        out = np.column_stack(
            [np.arange(n, dtype=np.uint32), table])
        np.savetxt(path, out, fmt="%d", delimiter=",", header=header,
                   comments="")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(PARTITION_MAGIC)
            fh.write(struct.pack("<IB3x", n, levels))
            fh.write(table.astype("<u4").tobytes())
    else:
        raise ValueError(f"unknown partition format {fmt!r}")


def read_partition(path) -> np.ndarray:
    """Read a partition file (either format) back into an (N, L) id table."""
    with open(path, "rb") as fh:
        head = fh.read(len(PARTITION_MAGIC))
        if head == PARTITION_MAGIC:
            n, levels = struct.unpack("<IB3x", fh.read(8))
            data = np.frombuffer(fh.read(n * levels * 4), dtype="<u4")
            if data.size != n * levels:
                raise ValueError(f"{path}: truncated partition payload")
            return data.reshape(n, levels).astype(np.int64)
    table = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64,
                       ndmin=2)
    return table[:, 1:]


def write_embeddings(path, embeddings: np.ndarray) -> None:
    emb = np.asarray(embeddings)
    if emb.ndim != 2:
        raise ValueError("embeddings must be an (N, M) matrix")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<II", emb.shape[0], emb.shape[1]))
        fh.write(emb.astype("<f4").tobytes())


def read_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(EMBEDDING_MAGIC))
        if magic != EMBEDDING_MAGIC:
            raise ValueError(f"{path}: not an embedding file")
        n, m = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(n * m * 4), dtype="<f4")
        if data.size != n * m:
            raise ValueError(f"{path}: truncated embedding payload")
    # keep the stored precision; callers widen when they need float64
    return data.reshape(n, m).astype(np.float32)


def write_graph_csv(path, graph) -> None:
    """Debug dump of an adjacency graph as ``u,v,w`` rows."""
    with open(path, "w") as fh:
        fh.write("u,v,w\n")
        for (u, v), w in zip(graph.edges, graph.weights):
            fh.write(f"{u},{v},{np.format_float_positional(w, trim='0')}\n")
