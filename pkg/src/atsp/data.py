"""Matrix file formats and synthetic instance generation.

Three interchange formats:

* ``bin``: magic ``ATSP``, u32 version 1, u64 row count, u64 column count,
  then row-major float64 values; everything little-endian. Round-trips are
  bit exact.
* ``csv``: dense rows, comma separated, ``.`` decimal, no header. Values
  are written with ``repr`` so reading them back is exact.
* ``mm``: Matrix Market ``coordinate real`` in the ``general`` or
  ``symmetric`` variant, parsed into CSR storage.
"""

from __future__ import annotations

import math
import struct

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import ContractViolationError, ParseError
from .rng import substream

FORMATS = ("bin", "csv", "mm")

_BIN_MAGIC = b"ATSP"
_BIN_VERSION = 1
_BIN_HEADER = struct.Struct("<4sIQQ")


def write_bin(path, data) -> None:
    if sp.issparse(data):
        data = np.asarray(data.todense())
    arr = np.ascontiguousarray(np.asarray(data, dtype="<f8"))
    n, d = arr.shape
    with open(path, "wb") as fh:
        fh.write(_BIN_HEADER.pack(_BIN_MAGIC, _BIN_VERSION, n, d))
        fh.write(arr.tobytes())


def read_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_BIN_HEADER.size)
        if len(header) < _BIN_HEADER.size:
            raise ParseError("truncated header", byte=len(header))
        magic, version, n, d = _BIN_HEADER.unpack(header)
        if magic != _BIN_MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected {_BIN_MAGIC!r}", byte=0)
        if version != _BIN_VERSION:
            raise ParseError(f"unsupported version {version}", byte=4)
        payload = fh.read()
    expected = n * d * 8
    if len(payload) != expected:
        raise ParseError(
            f"payload holds {len(payload)} bytes, expected {expected}",
            byte=_BIN_HEADER.size + min(len(payload), expected),
        )
    arr = np.frombuffer(payload, dtype="<f8").reshape(n, d)
    return np.ascontiguousarray(arr.astype(np.float64, copy=True))


def write_csv(path, data) -> None:
    if sp.issparse(data):
        data = np.asarray(data.todense())
    arr = np.asarray(data, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        for row in arr:
            fh.write(",".join(repr(v) for v in row.tolist()))
            fh.write("\n")


def read_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                row = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(f"bad value: {exc}", line=lineno) from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(
                    f"row has {len(row)} values, expected {width}", line=lineno
                )
            rows.append(row)
    if not rows:
        raise ParseError("file holds no rows", line=1)
    return np.asarray(rows, dtype=np.float64)


def write_mm(path, data) -> None:
    if sp.issparse(data):
        coo = data.tocoo()
        rows, cols, vals = coo.row, coo.col, coo.data
        n, d = data.shape
    else:
        arr = np.asarray(data, dtype=np.float64)
        rows, cols = np.nonzero(arr)
        vals = arr[rows, cols]
        n, d = arr.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{n} {d} {len(vals)}\n")
        for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            fh.write(f"{i + 1} {j + 1} {repr(v)}\n")


def read_mm(path) -> sp.csr_array:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty file", line=1)
    header = lines[0].strip().lower().split()
    if len(header) != 5 or header[0] != "%%matrixmarket" or header[1] != "matrix":
        raise ParseError("not a Matrix Market header", line=1)
    layout, field, symmetry = header[2], header[3], header[4]
    if layout != "coordinate" or field != "real":
        raise ParseError(
            f"only 'coordinate real' is supported, got '{layout} {field}'", line=1
        )
    if symmetry not in ("general", "symmetric"):
        raise ParseError(
            f"only general/symmetric are supported, got '{symmetry}'", line=1
        )

    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx >= len(lines):
        raise ParseError("missing size line", line=len(lines))
    size_parts = lines[idx].split()
    if len(size_parts) != 3:
        raise ParseError("size line must be 'rows cols nnz'", line=idx + 1)
    try:
        n, d, nnz = (int(p) for p in size_parts)
    except ValueError as exc:
        raise ParseError(f"bad size line: {exc}", line=idx + 1) from exc

    rows, cols, vals = [], [], []
    seen = 0
    for lineno in range(idx + 1, len(lines)):
        line = lines[lineno].strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError("entry must be 'i j value'", line=lineno + 1)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ParseError(f"bad entry: {exc}", line=lineno + 1) from exc
        if not (1 <= i <= n and 1 <= j <= d):
            raise ParseError(f"index ({i}, {j}) outside {n} x {d}", line=lineno + 1)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symmetry == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
        seen += 1
    if seen != nnz:
        raise ParseError(f"found {seen} entries, header declared {nnz}",
                         line=len(lines))
    mat = sp.coo_array((vals, (rows, cols)), shape=(n, d)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


_READERS = {"bin": read_bin, "csv": read_csv, "mm": read_mm}
_WRITERS = {"bin": write_bin, "csv": write_csv, "mm": write_mm}


def ingest(path, fmt):
    """Read a matrix; sparse storage for ``mm``, dense for ``csv``/``bin``."""
    if fmt not in FORMATS:
        raise ContractViolationError(f"unknown format {fmt!r}")
    return _READERS[fmt](path)


def emit(path, fmt, data) -> None:
    """Write a matrix in the given format."""
    if fmt not in FORMATS:
        raise ContractViolationError(f"unknown format {fmt!r}")
    _WRITERS[fmt](path, data)


def generate(n, d, r_target, density=1.0, seed=0) -> np.ndarray:
    """Gaussian instance rescaled so the Gram radius equals ``r_target``.

    Entries are i.i.d. normal, kept with probability ``density``, then the
    whole matrix is multiplied by the single scalar that puts the largest
    absolute Gram entry at ``r_target`` (well within 1e-9).
    """
    if not 1 <= n <= d:
        raise ContractViolationError(f"need 1 <= n <= d, got n={n}, d={d}")
    if not 0.0 < r_target < 0.1:
        raise ContractViolationError(f"need 0 < r_target < 0.1, got {r_target}")
    if not 0.0 < density <= 1.0:
        raise ContractViolationError(f"need 0 < density <= 1, got {density}")
    rng = substream(seed, "gen")
    x = rng.standard_normal((n, d))
    if density < 1.0:
        x = np.where(rng.random((n, d)) < density, x, 0.0)
    peak = linalg.inf_norm(linalg.gram(x))
    if peak == 0.0:
        raise ContractViolationError(
            "generated matrix is identically zero; raise the density"
        )
    x *= math.sqrt(r_target / peak)
    return np.ascontiguousarray(x)
