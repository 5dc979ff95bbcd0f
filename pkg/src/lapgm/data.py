"""Plain-CSV data loading with explicit error positions.

Accepts a header row of column names followed by numeric rows.  The strings
"NA", "NaN", "nan" and the empty field map to NaN; response columns may
contain NaN (those observations drop out of the likelihood) but index and
covariate columns may not.
"""

import csv
import math

import numpy as np

from .errors import DataError

_NA_STRINGS = {"", "NA", "NaN", "nan", "NAN"}


class Dataset:
    """Column-oriented table of float arrays."""

    def __init__(self, columns, nrows=None):
        self.columns = {k: np.asarray(v, dtype=np.float64) for k, v in columns.items()}
        lengths = {v.size for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError(f"data: columns have unequal lengths {sorted(lengths)}")
        self.nrows = int(nrows if nrows is not None else lengths.pop())

    def __contains__(self, name):
        return name in self.columns

    def __getitem__(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"data: no column named {name!r} "
                            f"(have: {', '.join(sorted(self.columns))})") from None

    def names(self):
        return list(self.columns)

    def index_column(self, name, n=None):
        """Validate a 1-based index column; returns 0-based int array and size."""
        raw = self[name]
        if np.isnan(raw).any():
            row = int(np.flatnonzero(np.isnan(raw))[0]) + 2
            raise DataError(f"data: column {name!r} has a missing value at line {row}")
        idx = raw.astype(np.int64)
        if not np.array_equal(idx, raw):
            row = int(np.flatnonzero(idx != raw)[0]) + 2
            raise DataError(f"data: column {name!r} must hold integers (line {row})")
        if idx.min() < 1:
            raise DataError(f"data: column {name!r} has entries below 1; indices are 1-based")
        size = int(idx.max()) if n is None else int(n)
        if idx.max() > size:
            raise DataError(
                f"data: column {name!r} has index {int(idx.max())} but n={size}")
        return idx - 1, size


def _parse_cell(cell, line_no, col_name):
    cell = cell.strip()
    if cell in _NA_STRINGS:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise DataError(
            f"data: line {line_no}, column {col_name!r}: "
            f"cannot parse {cell!r} as a number") from None


def read_csv(path):
    """Read a CSV file into a Dataset; raises DataError with line numbers."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"data: cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"data: {path} is empty") from None
        header = [h.strip() for h in header]
        if any(not h for h in header):
            raise DataError(f"data: {path} has an unnamed column in the header")
        if len(set(header)) != len(header):
            dup = next(h for h in header if header.count(h) > 1)
            raise DataError(f"data: duplicate column name {dup!r} in {path}")
        cols = {h: [] for h in header}
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"data: line {line_no} has {len(row)} fields, expected {len(header)}")
            for name, cell in zip(header, row):
                cols[name].append(_parse_cell(cell, line_no, name))
    nrows = len(next(iter(cols.values()))) if cols else 0
    if nrows == 0:
        raise DataError(f"data: {path} has no data rows")
    return Dataset({k: np.asarray(v, dtype=np.float64) for k, v in cols.items()}, nrows)


def write_csv(path, names, columns):
    """Write aligned float columns to CSV (NaN rendered as NA)."""
    arrays = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(len(arrays[0])):
            writer.writerow(
                ["NA" if math.isnan(a[i]) else repr(float(a[i])) for a in arrays])
