"""CSV ingestion with schema validation.

Renderers never recompute numerics: whatever is plotted must be a column of
an input file.  Schema mismatches and empty files are hard errors so a stale
or truncated experiment directory cannot silently produce an empty figure.
"""

from __future__ import annotations

import csv
import hashlib

import numpy as np

__all__ = ["SchemaError", "Table", "read_table", "inputs_digest"]


class SchemaError(ValueError):
    pass


class Table:
    """Column-oriented view of one CSV: header names -> float arrays."""

    def __init__(self, path, header, columns):
        self.path = str(path)
        self.header = header
        self.columns = columns

    def __getitem__(self, name):
        return self.columns[name]

    def rows(self):
        return zip(*(self.columns[h] for h in self.header))


def read_table(path, required, text_columns=()):
    """Load a headered CSV and check that the required columns are present."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}; header is {header}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    columns = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in rows]
        if name in text_columns:
            columns[name] = np.asarray(vals, dtype=object)
        else:
            try:
                columns[name] = np.asarray(vals, dtype=np.float64)
            except ValueError as exc:
                raise SchemaError(f"{path}: column {name!r} is not numeric: {exc}") from exc
    return Table(path, header, columns)


def inputs_digest(paths):
    """Short content hash of every input file, embedded in figure metadata."""
    h = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()[:16]
