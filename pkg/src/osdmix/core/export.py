"""
Data exporters: path batches and sample arrays as CSV or OSDB binary dumps,
per-checkpoint metric tables as CSV.

The OSDB dump is a 16-byte little-endian header (magic ``OSDB``, format
version, R, n, d) followed by R * n * d float64 values in (replica, time,
coordinate) order.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from osdmix.core.models import PathBatch
from osdmix.utils.errors import DomainError

MAGIC = b"OSDB"
FORMAT_VERSION = 1
HEADER_DTYPE = np.dtype(
    [("magic", "S4"), ("version", "<u2"), ("replicas", "<u4"), ("length", "<u4"), ("dim", "<u2")]
)
assert HEADER_DTYPE.itemsize == 16

PathLike = Union[str, Path]
ArrayChunks = Iterable[Union[PathBatch, np.ndarray]]


def _as_paths(chunk: Union[PathBatch, np.ndarray]) -> np.ndarray:
    data = chunk.data if isinstance(chunk, PathBatch) else np.asarray(chunk, dtype=np.float64)
    if data.ndim == 2:
        data = data[:, None, :]
    return data


def write_binary(path: PathLike, chunks: ArrayChunks, replicas: int, length: int, dim: int) -> Path:
    """
    Stream replica chunks into an OSDB dump.

    Raises:
        DomainError: if the chunks do not add up to the announced shape.
    """
    path = Path(path)
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header[0] = (MAGIC, FORMAT_VERSION, replicas, length, dim)
    written = 0
    with path.open("wb") as fh:
        fh.write(header.tobytes())
        for chunk in chunks:
            data = _as_paths(chunk)
            if data.shape[1:] != (length, dim):
                raise DomainError(
                    "chunk shape does not match header", details={"shape": data.shape}
                )
            fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
            written += data.shape[0]
    if written != replicas:
        raise DomainError(
            "replica count does not match header", details={"written": written, "header": replicas}
        )
    return path


def read_binary(path: PathLike) -> np.ndarray:
    """
    Load an OSDB dump as an (R, n, d) array.

    Raises:
        DomainError: if the file is not a well-formed OSDB dump.
    """
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise DomainError("file too short for an OSDB header", details={"path": str(path)})
    header = np.frombuffer(raw[: HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if header["magic"] != MAGIC or int(header["version"]) != FORMAT_VERSION:
        raise DomainError("not an OSDB dump", details={"path": str(path)})
    shape = (int(header["replicas"]), int(header["length"]), int(header["dim"]))
    body = np.frombuffer(raw[HEADER_DTYPE.itemsize :], dtype="<f8")
    if body.size != shape[0] * shape[1] * shape[2]:
        raise DomainError("OSDB payload size does not match header", details={"shape": shape})
    return body.reshape(shape).astype(np.float64)


def write_csv(path: PathLike, chunks: ArrayChunks, dim: int) -> Path:
    """
    Stream chunks as CSV rows ``r,t,x1..xd`` with 1-based t and LF line endings.

    Replica numbers continue across chunks; PathBatch chunks use their own
    first replica index.
    """
    path = Path(path)
    header = ",".join(["r", "t"] + [f"x{i + 1}" for i in range(dim)])
    fmt = ["%d", "%d"] + ["%.17g"] * dim
    next_replica = 0
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for chunk in chunks:
            data = _as_paths(chunk)
            first = chunk.first_replica if isinstance(chunk, PathBatch) else next_replica
            R, n, d = data.shape
            r_col = np.repeat(np.arange(first, first + R), n)
            t_col = np.tile(np.arange(1, n + 1), R)
            rows = np.column_stack([r_col, t_col, data.reshape(R * n, d)])
            np.savetxt(fh, rows, fmt=fmt, delimiter=",", newline="\n")
            next_replica = first + R
    return path


def read_csv(path: PathLike) -> np.ndarray:
    """Load a CSV written by `write_csv` back into an (R, n, d) array."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    replicas = np.unique(rows[:, 0]).size
    length = int(rows[:, 1].max())
    return rows[:, 2:].reshape(replicas, length, rows.shape[1] - 2)


def write_metrics_csv(path: PathLike, rows: Sequence[Dict[str, Any]], columns: List[str]) -> Path:
    """Write one CSV row per checkpoint; missing cells stay empty."""
    path = Path(path)
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for column in columns:
                value = row.get(column)
                if value is None:
                    cells.append("")
                elif isinstance(value, (int, np.integer)):
                    cells.append(str(int(value)))
                else:
                    cells.append(repr(float(value)))
            fh.write(",".join(cells) + "\n")
    return path
