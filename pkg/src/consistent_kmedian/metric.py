"""Point storage and the distance oracle.

Points are identified by their 0-based arrival index. A ``MetricSpace`` holds
either coordinates (L1 or L2 distance) or an explicit symmetric distance
matrix. Spaces are append-only: new arrivals can be added (the lower-bound
adversary builds its stream adaptively) but existing distances never change.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

TOL = 1e-9

KINDS = ("l1", "l2", "matrix")


class UnknownPointError(KeyError):
    pass


class MetricSpace:
    def __init__(self, kind: str, coords=None, matrix=None):
        if kind not in KINDS:
            raise ValueError(f"unknown metric kind {kind!r}")
        self.kind = kind
        if kind == "matrix":
            if matrix is None:
                raise ValueError("matrix metric needs a matrix")
            m = np.asarray(matrix, dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("distance matrix must be square")
            if np.any(m < 0) or not np.allclose(m, m.T, atol=TOL) or np.any(np.abs(np.diag(m)) > TOL):
                raise ValueError("distance matrix must be symmetric, nonnegative, zero diagonal")
            self._matrix = m
            self._n = m.shape[0]
            self._coords = None
        else:
            c = np.asarray(coords if coords is not None else np.zeros((0, 1)), dtype=np.float64)
            if c.ndim == 1:
                c = c[:, None]
            self._buf = np.array(c, copy=True)
            self._n = c.shape[0]
            self._coords = self._buf[: self._n]
            self._matrix = None

    @classmethod
    def euclidean(cls, coords, p: int = 2) -> "MetricSpace":
        return cls("l1" if p == 1 else "l2", coords=coords)

    @classmethod
    def from_matrix(cls, matrix, validate: bool = True) -> "MetricSpace":
        space = cls("matrix", matrix=matrix)
        if validate:
            witness = validate_metric(space)
            if witness is not None:
                raise ValueError(f"triangle inequality violated at {witness}")
        return space

    def __len__(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return 0 if self._coords is None else self._coords.shape[1]

    @property
    def coords(self) -> np.ndarray:
        if self._coords is None:
            raise TypeError("explicit-matrix space has no coordinates")
        return self._coords

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            raise TypeError("euclidean space has no stored matrix")
        return self._matrix

    def append(self, point) -> int:
        """Add a new point (coordinates) and return its id."""
        if self.kind == "matrix":
            raise TypeError("cannot append to an explicit-matrix space")
        p = np.asarray(point, dtype=np.float64).reshape(-1)
        if self._n and p.shape[0] != self._buf.shape[1]:
            raise ValueError("dimension mismatch")
        if self._n == 0:
            self._buf = np.zeros((16, p.shape[0]))
        elif self._n == self._buf.shape[0]:
            grown = np.zeros((2 * self._n, self._buf.shape[1]))
            grown[: self._n] = self._buf[: self._n]
            self._buf = grown
        self._buf[self._n] = p
        self._n += 1
        self._coords = self._buf[: self._n]
        return self._n - 1

    def _check(self, a: int) -> None:
        if not 0 <= a < self._n:
            raise UnknownPointError(a)

    def distance(self, a: int, b: int) -> float:
        self._check(a)
        self._check(b)
        if a == b:
            return 0.0
        if self._matrix is not None:
            return float(self._matrix[a, b])
        diff = self._coords[a] - self._coords[b]
        if self.kind == "l1":
            return float(np.abs(diff).sum())
        return float(np.sqrt(diff @ diff))

    def distances_from(self, a: int, ids=None) -> np.ndarray:
        """Distances from ``a`` to ``ids`` (default: every loaded point)."""
        self._check(a)
        if self._matrix is not None:
            row = self._matrix[a]
            return row.copy() if ids is None else row[np.asarray(ids, dtype=np.intp)]
        pts = self._coords if ids is None else self._coords[np.asarray(ids, dtype=np.intp)]
        diff = pts - self._coords[a]
        if self.kind == "l1":
            out = np.abs(diff).sum(axis=1)
        else:
            out = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if ids is None:
            out[a] = 0.0
        return out

    def pairwise(self, ids=None) -> np.ndarray:
        if ids is None:
            ids = np.arange(self._n)
        ids = np.asarray(ids, dtype=np.intp)
        if self._matrix is not None:
            return self._matrix[np.ix_(ids, ids)].copy()
        pts = self._coords[ids]
        diff = pts[:, None, :] - pts[None, :, :]
        if self.kind == "l1":
            out = np.abs(diff).sum(axis=2)
        else:
            out = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(out, 0.0)
        return out

    def location(self, a: int):
        """JSON-friendly description of point ``a``'s location."""
        self._check(a)
        if self._coords is None:
            return None
        return [float(v) for v in self._coords[a]]


def validate_metric(space: MetricSpace, tol: float = TOL):
    """Return the first ``(a, b, c)`` with d(a,c) > d(a,b) + d(b,c) + tol, else None.

    Euclidean spaces are metrics by construction and return None without a scan.
    """
    if space.kind != "matrix":
        return None
    m = space.matrix
    n = m.shape[0]
    for a in range(n):
        # d(a,c) versus min over b of d(a,b) + d(b,c), vectorised over (b, c)
        via = m[a][:, None] + m
        bad = m[a][None, :] > via + tol
        if bad.any():
            b, c = np.argwhere(bad)[0]
            return (int(a), int(b), int(c))
    return None


@dataclass
class Stream:
    """An arrival-ordered point set: point ``i`` is the i-th arrival."""

    space: MetricSpace
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.space)

    def prefix(self, i: int) -> range:
        """Ids of X_i, the first ``i`` arrivals."""
        return range(min(i, len(self.space)))


def write_stream(path, stream: Stream, matrix_path=None) -> None:
    """Write the stream as JSON lines after a metadata header.

    Explicit-matrix streams put the matrix in a CSV sidecar next to ``path``.
    """
    path = Path(path)
    space = stream.space
    with path.open("w") as fh:
        meta = {**stream.meta, "metric": space.kind}
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for i in range(len(space)):
            rec = {"id": i}
            if space.kind != "matrix":
                rec["coords"] = space.location(i)
            fh.write(json.dumps(rec) + "\n")
    if space.kind == "matrix":
        side = Path(matrix_path) if matrix_path else path.with_suffix(".csv")
        np.savetxt(side, space.matrix, delimiter=",", fmt="%.17g")


def read_stream(path, metric: str | None = None, matrix_path=None, validate: bool = True) -> Stream:
    path = Path(path)
    meta: dict = {}
    coords: list[list[float]] = []
    ids: list[int] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "meta" in rec:
                meta = rec["meta"]
                continue
            if rec.get("id") != len(ids):
                raise ValueError(f"{path}:{lineno}: ids must be dense and in arrival order")
            ids.append(rec["id"])
            if "coords" in rec:
                coords.append(rec["coords"])
    if not ids:
        raise ValueError(f"{path}: empty stream")
    metric = metric or meta.get("metric", "l2")
    if coords and len(coords) != len(ids):
        raise ValueError(f"{path}: mixed coordinate and matrix records")
    if coords:
        kind = "l1" if metric == "l1" else "l2"
        space = MetricSpace(kind, coords=np.asarray(coords, dtype=np.float64))
    else:
        side = Path(matrix_path) if matrix_path else path.with_suffix(".csv")
        with side.open() as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        m = np.asarray(rows)
        if m.shape != (len(ids), len(ids)):
            raise ValueError(f"{side}: matrix shape {m.shape} does not match {len(ids)} points")
        space = MetricSpace.from_matrix(m, validate=validate)
    return Stream(space, meta)


def line_space(xs: Iterable[float], kind: str = "l1") -> MetricSpace:
    """Points on the real line (L1 and L2 coincide in one dimension)."""
    return MetricSpace(kind, coords=np.asarray(list(xs), dtype=np.float64)[:, None])
