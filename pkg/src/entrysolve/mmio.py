"""Matrix Market (integer symmetric coordinate) and plain-vector file I/O.

Indices are 1-based on disk, 0-based in memory. The writer emits a
``% U <bound>`` comment so the declared entry bound round-trips; the
reader falls back to the observed maximum magnitude.
"""

from __future__ import annotations

import numpy as np

from .core import SddmMatrix, validate_sddm


class ParseError(ValueError):
    pass


_HEADER = "%%MatrixMarket matrix coordinate integer symmetric"


def write_matrix(path, L: SddmMatrix) -> None:
    """Write the lower triangle of L in Matrix Market symmetric format."""
    keep = L.rows >= L.cols
    rows, cols, vals = L.rows[keep], L.cols[keep], L.vals[keep]
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"% U {L.U}\n")
        fh.write(f"{L.n} {L.n} {len(vals)}\n")
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{i + 1} {j + 1} {v}\n")


def read_matrix(path, U: int | None = None) -> SddmMatrix:
    """Parse and validate a Matrix Market symmetric integer matrix."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0].strip().lower().split()
    if len(header) != 5 or header[0] != "%%matrixmarket":
        raise ParseError(f"{path}: missing MatrixMarket header")
    if header[1:] != ["matrix", "coordinate", "integer", "symmetric"]:
        raise ParseError(
            f"{path}: only 'matrix coordinate integer symmetric' is supported"
        )
    declared_U = None
    idx = 1
    while idx < len(lines):
        line = lines[idx].strip()
        if line.startswith("%"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "U":
                try:
                    declared_U = int(parts[1])
                except ValueError as exc:
                    raise ParseError(f"{path}: bad U comment") from exc
            idx += 1
        elif not line:
            idx += 1
        else:
            break
    if idx >= len(lines):
        raise ParseError(f"{path}: missing size line")
    size_parts = lines[idx].split()
    if len(size_parts) != 3:
        raise ParseError(f"{path}: malformed size line {lines[idx]!r}")
    try:
        nrows, ncols, nnz = (int(p) for p in size_parts)
    except ValueError as exc:
        raise ParseError(f"{path}: malformed size line {lines[idx]!r}") from exc
    if nrows != ncols:
        raise ParseError(f"{path}: matrix must be square")
    triples = []
    for line in lines[idx + 1:]:
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"{path}: malformed entry line {line!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer entry {line!r}") from exc
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"{path}: index out of range in {line!r}")
        if i < j:
            raise ParseError(f"{path}: upper-triangle entry {line!r} in symmetric file")
        triples.append((i - 1, j - 1, v))
        if i != j:
            triples.append((j - 1, i - 1, v))
    stored = sum(1 for i, j, _ in triples if i >= j)
    if stored != nnz:
        raise ParseError(f"{path}: size line declares {nnz} entries, found {stored}")
    if U is None:
        U = declared_U
    if U is None:
        U = max((abs(v) for _, _, v in triples), default=1)
    return validate_sddm(triples, U=U, n=nrows)


def write_vector(path, values) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(values).ravel().tolist():
            fh.write(f"{v!r}\n" if isinstance(v, float) else f"{v}\n")


def read_vector(path) -> np.ndarray:
    """Whitespace-separated decimal text; returns float64."""
    try:
        with open(path) as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric vector entry") from exc
