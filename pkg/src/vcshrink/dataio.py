"""Dataset file handling and result export.

The input contract is delimited text with header ``t,y,x1,...,xp``, one
observation per row, decimal point ".". Values are written back with
full-precision ``repr`` so a write/read round trip is exact.
"""

import csv
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Malformed dataset file or inconsistent values."""


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    t: np.ndarray
    x: np.ndarray
    column_names: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        n = y.size
        if t.shape != (n,) or x.ndim != 2 or x.shape[0] != n:
            raise DataError("inconsistent dataset dimensions")
        for name, arr in (("y", y), ("t", t), ("x", x)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite value in {name}")
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise DataError("index values must lie in [0, 1]")
        names = self.column_names
        if names is not None:
            names = tuple(names)
            if len(names) != x.shape[1]:
                raise DataError("column_names length does not match x")
        for arr in (y, t, x):
            arr.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"row {row}: cannot parse {col}={cell!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}: non-finite value in column {col}")
    return v


def read_dataset(path, fmt: str = "csv", rescale_t: bool = False) -> Dataset:
    """Read a delimited-text dataset with header ``t,y,x1,...,xp``.

    Index values outside [0, 1] are an error unless `rescale_t` is set, in
    which case they are mapped affinely so min -> 0 and max -> 1.
    """
    if fmt != "csv":
        raise DataError(f"unsupported dataset format {fmt!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty dataset file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "t" or header[1] != "y":
            raise DataError('header must be "t,y,x1,...,xp"')
        xnames = header[2:]
        rows_t, rows_y, rows_x = [], [], []
        for i, row in enumerate(reader, start=2):  # 1-based incl. header
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"row {i}: expected {len(header)} fields, got {len(row)}")
            rows_t.append(_parse_float(row[0], i, "t"))
            rows_y.append(_parse_float(row[1], i, "y"))
            rows_x.append([_parse_float(c, i, name)
                           for c, name in zip(row[2:], xnames)])
    if not rows_t:
        raise DataError("dataset has no observations")
    t = np.array(rows_t)
    if rescale_t:
        lo, hi = t.min(), t.max()
        t = (t - lo) / (hi - lo) if hi > lo else np.zeros_like(t)
    else:
        bad = np.flatnonzero((t < 0.0) | (t > 1.0))
        if bad.size:
            raise DataError(f"row {bad[0] + 2}: index value {t[bad[0]]!r} outside "
                            "[0, 1] (use rescale_t to map onto the unit interval)")
    return Dataset(y=np.array(rows_y), t=t, x=np.array(rows_x),
                   column_names=tuple(xnames))


def write_dataset(ds: Dataset, path) -> None:
    """Write a dataset in the header contract with full-precision values."""
    names = ds.column_names or tuple(f"x{j + 1}" for j in range(ds.p))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y", *names])
        for i in range(ds.n):
            writer.writerow([repr(ds.t[i]), repr(ds.y[i]),
                             *[repr(v) for v in ds.x[i]]])


def input_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class FitExport:
    """Serializable summary of one fitted model."""

    classification: tuple              # per covariate: "zero"|"constant"|"varying"
    constant_values: dict              # covariate name -> value
    function_samples: dict             # covariate name -> list of values
    sample_grid: tuple
    lambda0: float | None
    lambda1: float
    lambda2: float
    criterion: dict
    rss: float
    K: int
    order: int
    diagnostics: dict
    version: str
    input_digest: str

    def to_dict(self) -> dict:
        return {
            "classification": list(self.classification),
            "constant_values": dict(self.constant_values),
            "function_samples": {k: list(v) for k, v in self.function_samples.items()},
            "sample_grid": list(self.sample_grid),
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "criterion": dict(self.criterion),
            "rss": self.rss,
            "K": self.K,
            "order": self.order,
            "diagnostics": dict(self.diagnostics),
            "version": self.version,
            "input_digest": self.input_digest,
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
