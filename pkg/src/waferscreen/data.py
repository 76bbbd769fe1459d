"""Wafer-test matrices: immutable in-memory representation and CSV round trip.

A matrix holds one row per tested lot and one column per test parameter.
Values are finite float64; lot and parameter ids are opaque strings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    EmptyData,
    EmptySelection,
    MalformedCsv,
    NonNumericCell,
    UnknownParam,
)


class Label(str, Enum):
    GOOD = "GOOD"
    BAD = "BAD"


@dataclass(frozen=True)
class IngestOptions:
    """CSV ingestion knobs.

    With ``impute_missing`` enabled, empty or unparsable cells are replaced by
    the median of the parsable values in their column. Disabled, any such cell
    raises :class:`NonNumericCell`.
    """

    impute_missing: bool = True


@dataclass(frozen=True)
class DataMatrix:
    """Lots-by-parameters matrix of finite measurements.

    Immutable after construction; the value buffer is marked read-only so the
    matrix can be shared freely across threads.
    """

    values: np.ndarray
    param_ids: tuple[str, ...]
    lot_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError("values must be a 2-d array")
        params = tuple(str(p) for p in self.param_ids)
        lots = tuple(str(l) for l in self.lot_ids)
        if vals.shape[0] < 1 or vals.shape[1] < 1:
            raise EmptyData("matrix needs at least one lot and one parameter")
        if vals.shape != (len(lots), len(params)):
            raise ValueError(
                f"shape {vals.shape} does not match {len(lots)} lots x {len(params)} params"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix values must be finite (no NaN or inf)")
        if len(set(params)) != len(params):
            raise ValueError("duplicate param ids")
        if len(set(lots)) != len(lots):
            raise ValueError("duplicate lot ids")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "param_ids", params)
        object.__setattr__(self, "lot_ids", lots)

    @property
    def n_lots(self) -> int:
        return self.values.shape[0]

    @property
    def n_params(self) -> int:
        return self.values.shape[1]

    def param_index(self, param_id: str) -> int:
        try:
            return self.param_ids.index(param_id)
        except ValueError:
            raise UnknownParam(f"unknown parameter {param_id!r}") from None


@dataclass(frozen=True)
class ColumnView:
    """Read-only projection of one parameter's samples across all lots."""

    param_id: str
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class LabelSet:
    """Optional GOOD/BAD ground truth keyed by lot id."""

    labels: Mapping[str, Label]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "labels", {str(k): Label(v) for k, v in dict(self.labels).items()}
        )

    def __len__(self) -> int:
        return len(self.labels)

    def bad_lots(self) -> set[str]:
        return {k for k, v in self.labels.items() if v is Label.BAD}

    def covers(self, matrix: DataMatrix) -> bool:
        return set(matrix.lot_ids) <= set(self.labels)


def column(m: DataMatrix, param_id: str) -> ColumnView:
    """Return a read-only view of one column."""
    j = m.param_index(param_id)
    return ColumnView(param_id=param_id, samples=m.values[:, j])


def restrict(m: DataMatrix, keep: Iterable[str]) -> DataMatrix:
    """New matrix with only the given columns, original relative order kept."""
    keep_set = set(keep)
    if not keep_set:
        raise EmptySelection("cannot restrict to an empty parameter set")
    for pid in keep_set:
        if pid not in m.param_ids:
            raise UnknownParam(f"unknown parameter {pid!r}")
    cols = [j for j, pid in enumerate(m.param_ids) if pid in keep_set]
    return DataMatrix(
        values=m.values[:, cols],
        param_ids=tuple(m.param_ids[j] for j in cols),
        lot_ids=m.lot_ids,
    )


def _data_lines(path) -> Iterable[str]:
    # leading '#' lines are tool-generated comments (timestamps etc.)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            yield line


def load_csv(path, options: IngestOptions = IngestOptions()) -> DataMatrix:
    """Parse a ``lot,<param_ids...>`` CSV file into a :class:`DataMatrix`.

    The first row is the header, the first column holds lot ids. Empty or
    non-numeric cells are treated as missing; see :class:`IngestOptions`.
    Columns with no parsable value at all are rejected.
    """
    rows = list(csv.reader(_data_lines(path)))
    if not rows:
        raise EmptyData(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise EmptyData(f"{path}: no data columns in header")
    param_ids = tuple(h.strip() for h in header[1:])
    if len(set(param_ids)) != len(param_ids):
        raise MalformedCsv(f"{path}: duplicate parameter id in header")
    body = rows[1:]
    if not body:
        raise EmptyData(f"{path}: no data rows")

    lot_ids: list[str] = []
    values = np.empty((len(body), len(param_ids)), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise MalformedCsv(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        lot_ids.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            try:
                v = float(cell) if cell else float("nan")
            except ValueError:
                v = float("nan")
            if not np.isfinite(v):
                if not options.impute_missing:
                    raise NonNumericCell(
                        f"{path}: row {i + 2}, column {param_ids[j]!r}: {cell!r}"
                    )
                v = float("nan")
            values[i, j] = v
    if len(set(lot_ids)) != len(lot_ids):
        raise MalformedCsv(f"{path}: duplicate lot id")

    for j, pid in enumerate(param_ids):
        col = values[:, j]
        missing = np.isnan(col)
        if missing.all():
            raise MalformedCsv(f"{path}: column {pid!r} has no parsable value")
        if missing.any():
            col[missing] = np.median(col[~missing])
    return DataMatrix(values=values, param_ids=param_ids, lot_ids=tuple(lot_ids))


def fmt_float(v: float) -> str:
    """Shortest decimal string that round-trips the exact double."""
    return repr(float(v))


def save_csv(m: DataMatrix, path, header_comment: str | None = None) -> None:
    """Write a matrix as ``lot,<param_ids...>`` CSV with full-precision floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment is not None:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["lot", *m.param_ids])
        for i, lot in enumerate(m.lot_ids):
            writer.writerow([lot, *(fmt_float(v) for v in m.values[i])])


def load_labels(path) -> LabelSet:
    """Parse a ``lot,label`` CSV with GOOD/BAD labels."""
    rows = list(csv.reader(_data_lines(path)))
    if not rows:
        raise EmptyData(f"{path}: empty label file")
    labels: dict[str, Label] = {}
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise MalformedCsv(f"{path}: row {i} has {len(row)} fields, expected 2")
        lot, raw = row[0].strip(), row[1].strip().upper()
        if lot in labels:
            raise MalformedCsv(f"{path}: duplicate lot id {lot!r}")
        try:
            labels[lot] = Label(raw)
        except ValueError:
            raise MalformedCsv(f"{path}: row {i}: unknown label {row[1]!r}") from None
    return LabelSet(labels=labels)


def save_labels(labels: LabelSet, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment is not None:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["lot", "label"])
        for lot in sorted(labels.labels):
            writer.writerow([lot, labels.labels[lot].value])
