"""Series containers, sample moments and lagged cross-correlation.

All containers are immutable: the underlying arrays are copied on
construction and marked read-only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class BinarySeries:
    """A 0/1 hit sequence."""

    values: np.ndarray
    label: str | None = None

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 1:
            raise ValueError("binary series must be one-dimensional")
        if arr.size == 0:
            raise ValueError("empty input")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("binary series values must be exactly 0 or 1")
        arr = arr.astype(np.int8)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BinaryPanel:
    """N binary series of common length T, stored as a (T, N) array."""

    values: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError("binary panel must be a (T, N) array")
        if arr.shape[0] == 0:
            raise ValueError("empty input")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("binary panel values must be exactly 0 or 1")
        arr = arr.astype(np.int8)
        arr.flags.writeable = False
        labels = tuple(self.labels) if self.labels else tuple(
            f"X{i + 1}" for i in range(arr.shape[1]))
        if len(labels) != arr.shape[1]:
            raise ValueError("number of labels does not match panel width")
        if len(set(labels)) != len(labels):
            raise ValueError("panel labels must be distinct")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_series(cls, series: Sequence[BinarySeries]) -> "BinaryPanel":
        lengths = {len(s) for s in series}
        if len(lengths) != 1:
            raise ValueError("all member series must share length T")
        labels = tuple(s.label or f"X{i + 1}" for i, s in enumerate(series))
        return cls(np.column_stack([s.values for s in series]), labels)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, key: int | str) -> BinarySeries:
        j = self.labels.index(key) if isinstance(key, str) else key
        return BinarySeries(self.values[:, j], self.labels[j])

    def select(self, keys: Iterable[int | str]) -> "BinaryPanel":
        idx = [self.labels.index(k) if isinstance(k, str) else k for k in keys]
        return BinaryPanel(self.values[:, idx], tuple(self.labels[j] for j in idx))


@dataclass(frozen=True)
class RealSeries:
    """Finite real-valued series (returns, prices, volatilities)."""

    values: np.ndarray
    label: str | None = None
    timestamps: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("real series must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("real series values must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != arr.shape[0]:
                raise ValueError("timestamps do not match series length")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return self.values.shape[0]


def as_binary(x) -> np.ndarray:
    """Return the 0/1 values of ``x`` (a BinarySeries or array-like)."""
    if isinstance(x, BinarySeries):
        return x.values
    return BinarySeries(np.asarray(x)).values


def as_panel(panel) -> BinaryPanel:
    if isinstance(panel, BinaryPanel):
        return panel
    return BinaryPanel(np.asarray(panel))


def sample_mean(s) -> float:
    """Arithmetic mean of a binary series."""
    values = s.values if isinstance(s, BinarySeries) else np.asarray(s)
    if values.size == 0:
        raise ValueError("empty input")
    return float(np.mean(values))


def lagged_cross_correlation(x, y, lag: int) -> float:
    """Pearson correlation between ``x[t]`` and ``y[t - lag]``.

    Only the ``T - |lag|`` overlapping pairs are used; means and population
    variances are recomputed on that window.
    """
    xv = as_binary(x).astype(float)
    yv = as_binary(y).astype(float)
    T = xv.shape[0]
    if yv.shape[0] != T:
        raise ValueError("series must have equal lengths")
    if abs(lag) >= T:
        raise ValueError("lag out of range")
    if np.all(xv == xv[0]) or np.all(yv == yv[0]):
        raise ValueError("zero variance")
    if lag >= 0:
        a, b = xv[lag:], yv[:T - lag]
    else:
        a, b = xv[:T + lag], yv[-lag:]
    a = a - a.mean()
    b = b - b.mean()
    sa = np.sqrt(np.mean(a * a))
    sb = np.sqrt(np.mean(b * b))
    if sa == 0.0 or sb == 0.0:
        raise ValueError("zero variance")
    rho = np.mean(a * b) / (sa * sb)
    return float(np.clip(rho, -1.0, 1.0))


# -- CSV formats -------------------------------------------------------------

def read_panel_csv(path: str | Path) -> BinaryPanel:
    """Read a panel CSV: a header row of labels, then T rows of 0/1 values."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: panel CSV needs a header and at least one record")
    labels = tuple(c.strip() for c in rows[0])
    try:
        data = np.array([[int(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer panel entry ({exc})") from None
    if data.shape[1:] != (len(labels),):
        raise ValueError(f"{path}: ragged panel rows")
    return BinaryPanel(data, labels)


def write_panel_csv(panel: BinaryPanel, path_or_file) -> None:
    _write_table(panel.labels, panel.values, path_or_file, fmt="{:d}")


def write_real_panel_csv(labels: Sequence[str], values: np.ndarray, path_or_file) -> None:
    _write_table(labels, values, path_or_file, fmt="{:.17g}")


def _write_table(labels, values, path_or_file, fmt):
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(labels)
        for row in values:
            w.writerow([fmt.format(v) for v in row.tolist()])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def read_real_series_csv(path: str | Path, label: str | None = None) -> RealSeries:
    """Read a ``timestamp,value`` CSV; timestamps are kept verbatim."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "value"]:
            raise ValueError(f"{path}: expected header 'timestamp,value'")
        ts, vals = [], []
        for row in reader:
            if not row:
                continue
            ts.append(row[0])
            vals.append(float(row[1]))
    return RealSeries(np.array(vals), label=label, timestamps=tuple(ts))


def write_real_series_csv(series: RealSeries, path_or_file) -> None:
    ts = series.timestamps or tuple(str(i) for i in range(len(series)))

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value"])
        for t, v in zip(ts, series.values.tolist()):
            w.writerow([t, f"{v:.17g}"])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
