"""Binary grid files and CSV logs.

Grid format: magic b"CGOG", version (u16), rank (u8), a complex flag (u8),
the dims (u64 each), then row-major little-endian float64 values; complex
arrays are stored as interleaved (re, im) pairs. Everything is little-endian,
so files are bit-identical across platforms.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"CGOG"
VERSION = 1


class GridFormatError(ValueError):
    pass


def write_grid(path, array) -> None:
    a = np.asarray(array)
    is_complex = np.iscomplexobj(a)
    header = MAGIC + struct.pack("<HBB", VERSION, a.ndim, int(is_complex))
    header += struct.pack("<" + "Q" * a.ndim, *a.shape)
    if is_complex:
        body = np.ascontiguousarray(a, dtype="<c16").view("<f8")
    else:
        body = np.ascontiguousarray(a, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes(order="C"))


def read_grid(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise GridFormatError(f"{path}: not a CGOG grid file")
    version, rank, is_complex = struct.unpack_from("<HBB", data, 4)
    if version != VERSION:
        raise GridFormatError(f"{path}: unsupported version {version}")
    off = 8
    shape = struct.unpack_from("<" + "Q" * rank, data, off)
    off += 8 * rank
    n = int(np.prod(shape)) if rank else 1
    count = 2 * n if is_complex else n
    if len(data) - off != 8 * count:
        raise GridFormatError(f"{path}: payload size does not match the header")
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=off)
    if is_complex:
        vals = vals.view("<c16")
    return vals.reshape(shape).astype(complex if is_complex else float)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """RFC-4180 CSV (CRLF line endings, minimal quoting) with a mandatory header row."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(list(header))
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
