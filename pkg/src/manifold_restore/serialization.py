"""Binary graph / basis blocks and CSV tables.

All binary values are little-endian.

    AFG1 graph:  b"AFG1", u64 m, u64 nnz, nnz x (u32 row, u32 col, f64 w), row-major order
    GOC1/KMN1:   per basis: magic, u32 n, u32 p, f64 centroid[n],
                 f64 vectors[n*p] column-major, f64 eigenvalues[p]
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import LocalBasis

GRAPH_MAGIC = b"AFG1"
GOC_MAGIC = b"GOC1"
KMEANS_MAGIC = b"KMN1"
_EDGE = np.dtype([("row", "<u4"), ("col", "<u4"), ("w", "<f8")])

METRICS_HEADER = ("image", "strategy", "task", "psnr_db", "ssim", "wall_seconds")


class FormatError(ValueError):
    pass


def graph_to_bytes(matrix) -> bytes:
    A = sp.coo_matrix(matrix)
    order = np.lexsort((A.col, A.row))
    rec = np.empty(A.nnz, dtype=_EDGE)
    rec["row"], rec["col"], rec["w"] = A.row[order], A.col[order], A.data[order]
    return GRAPH_MAGIC + struct.pack("<QQ", A.shape[0], A.nnz) + rec.tobytes()


def graph_from_bytes(buf: bytes) -> sp.csr_matrix:
    if buf[:4] != GRAPH_MAGIC:
        raise FormatError("not an AFG1 graph")
    if len(buf) < 20:
        raise FormatError("truncated graph header")
    m, nnz = struct.unpack_from("<QQ", buf, 4)
    if len(buf) != 20 + nnz * _EDGE.itemsize:
        raise FormatError("graph size does not match header")
    rec = np.frombuffer(buf, dtype=_EDGE, count=nnz, offset=20)
    if nnz and (rec["row"].max() >= m or rec["col"].max() >= m):
        raise FormatError("edge index out of range")
    A = sp.csr_matrix((rec["w"].astype(float), (rec["row"].astype(np.int64), rec["col"].astype(np.int64))), shape=(m, m))
    A.sort_indices()
    return A


def write_graph(path, matrix) -> None:
    Path(path).write_bytes(graph_to_bytes(matrix))


def read_graph(path) -> sp.csr_matrix:
    return graph_from_bytes(Path(path).read_bytes())


def bases_to_bytes(bases, magic: bytes = GOC_MAGIC) -> bytes:
    parts = []
    for b in bases:
        n, p = b.vectors.shape
        parts.append(magic + struct.pack("<II", n, p))
        parts.append(np.asarray(b.centroid, "<f8").tobytes())
        parts.append(np.asarray(b.vectors, "<f8").tobytes(order="F"))
        parts.append(np.asarray(b.eigenvalues, "<f8").tobytes())
    return b"".join(parts)


def bases_from_bytes(buf: bytes, magic: bytes = GOC_MAGIC) -> list:
    out, i = [], 0
    while i < len(buf):
        if buf[i : i + 4] != magic:
            raise FormatError(f"expected {magic.decode()} block at byte {i}")
        if len(buf) < i + 12:
            raise FormatError("truncated basis header")
        n, p = struct.unpack_from("<II", buf, i + 4)
        i += 12
        need = 8 * (n + n * p + p)
        if len(buf) < i + need:
            raise FormatError("truncated basis block")
        vals = np.frombuffer(buf, dtype="<f8", count=n + n * p + p, offset=i).astype(float)
        i += need
        out.append(LocalBasis(vals[:n].copy(), vals[n : n + n * p].reshape((n, p), order="F").copy(), vals[n + n * p :].copy()))
    return out


def write_bases(path, bases, magic: bytes = GOC_MAGIC) -> None:
    Path(path).write_bytes(bases_to_bytes(bases, magic))


def read_bases(path, magic: bytes = GOC_MAGIC) -> list:
    return bases_from_bytes(Path(path).read_bytes(), magic)


def write_clusters_csv(path, member_lists) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("cluster_id", "member_index"))
        for k, members in enumerate(member_lists):
            for i in members:
                w.writerow((k, int(i)))


def read_clusters_csv(path) -> list:
    groups: dict[int, list] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            groups.setdefault(int(row["cluster_id"]), []).append(int(row["member_index"]))
    return [np.array(groups[k]) for k in sorted(groups)]


def write_neighbors_csv(path, neighbor_sets) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("query_id", "index", "affinity"))
        for q, ns in enumerate(neighbor_sets):
            for i, a in zip(ns.indices, ns.affinities):
                w.writerow((q, int(i), repr(float(a))))


def write_metrics_csv(path, rows) -> None:
    """Rows are dicts or tuples in METRICS_HEADER order."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for r in rows:
            if isinstance(r, dict):
                r = [r[k] for k in METRICS_HEADER]
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in r])


def read_metrics_csv(path) -> list:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    for r in rows:
        for k in ("psnr_db", "ssim", "wall_seconds"):
            r[k] = float(r[k])
    return rows
