"""CSV ingestion and the numeric encoding the model trains on.

Numerical columns are min-max scaled to [0, 1]; categorical columns become
one-hot blocks. Decoding clamps numerical slots back into [0, 1] before
inverting the scaler and resolves each categorical block by softmax followed
by argmax (ties go to the lowest category index).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTable,
    InputError,
    MissingColumn,
    NonFiniteNumeric,
    UnknownCategory,
    WidthMismatch,
)
from .schema import Table, TableSchema


@dataclass
class ColumnScaler:
    """Per-numerical-column (min, max) statistics. A constant column
    (max == min) encodes to 0 and decodes back to min."""

    mins: dict[str, float] = field(default_factory=dict)
    maxs: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"mins": dict(self.mins), "maxs": dict(self.maxs)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ColumnScaler":
        return cls(mins=dict(d["mins"]), maxs=dict(d["maxs"]))


@dataclass
class EncodedMatrix:
    """Row-major N x D float64 matrix plus the schema (and scaler) that
    produced it."""

    data: np.ndarray
    schema: TableSchema
    scaler: ColumnScaler | None = None

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def load_csv(path, schema: TableSchema) -> Table:
    """Parse a CSV file against a schema.

    The header must contain exactly the schema's column names (any order);
    numerical cells must parse as finite reals and categorical cells must be
    in the column vocabulary. Missing values are rejected.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise InputError(f"CSV file not found: {path}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTable(f"{path}: no header row")
        expected = schema.column_names
        for name in expected:
            if name not in header:
                raise MissingColumn(name)
        extra = [h for h in header if h not in expected]
        if extra:
            raise InputError(f"{path}: unexpected columns {extra}")
        positions = {name: header.index(name) for name in expected}

        raw_cols: dict[str, list] = {name: [] for name in expected}
        for row_idx, row in enumerate(reader):
            if len(row) != len(header):
                raise InputError(f"{path}: row {row_idx} has {len(row)} cells, expected {len(header)}")
            for col in schema.columns:
                cell = row[positions[col.name]]
                if col.kind == "numerical":
                    try:
                        value = float(cell)
                    except ValueError:
                        raise NonFiniteNumeric(row_idx, col.name, cell)
                    if not math.isfinite(value):
                        raise NonFiniteNumeric(row_idx, col.name, cell)
                    raw_cols[col.name].append(value)
                else:
                    if cell not in col.categories:
                        raise UnknownCategory(col.name, cell, row_idx)
                    raw_cols[col.name].append(cell)

    columns = {}
    for col in schema.columns:
        if col.kind == "numerical":
            columns[col.name] = np.asarray(raw_cols[col.name], dtype=np.float64)
        else:
            columns[col.name] = np.asarray(raw_cols[col.name], dtype=object)
    return Table(schema=schema, columns=columns)


def save_csv(table: Table, path) -> None:
    """Write a table back to CSV with the schema's header order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.schema.column_names)
        for row in table.rows():
            writer.writerow([_format_cell(v) for v in row])


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def fit_scaler(table: Table) -> ColumnScaler:
    if table.n_rows == 0:
        raise EmptyTable("cannot fit a scaler on an empty table")
    scaler = ColumnScaler()
    for col in table.schema.columns:
        if col.kind != "numerical":
            continue
        values = table.columns[col.name]
        scaler.mins[col.name] = float(values.min())
        scaler.maxs[col.name] = float(values.max())
    return scaler


def encode(table: Table, scaler: ColumnScaler) -> EncodedMatrix:
    """Encode a table with an existing scaler (no fitting)."""
    if table.n_rows == 0:
        raise EmptyTable("cannot encode an empty table")
    n = table.n_rows
    blocks = []
    for col in table.schema.columns:
        values = table.columns[col.name]
        if col.kind == "numerical":
            lo, hi = scaler.mins[col.name], scaler.maxs[col.name]
            if hi > lo:
                blocks.append(((values - lo) / (hi - lo)).reshape(n, 1))
            else:
                blocks.append(np.zeros((n, 1)))
        else:
            index = {cat: j for j, cat in enumerate(col.categories)}
            onehot = np.zeros((n, len(col.categories)))
            for i, v in enumerate(values):
                onehot[i, index[v]] = 1.0
            blocks.append(onehot)
    data = np.concatenate(blocks, axis=1).astype(np.float64)
    return EncodedMatrix(data=data, schema=table.schema, scaler=scaler)


def fit_encode(table: Table, schema: TableSchema | None = None) -> tuple[EncodedMatrix, ColumnScaler]:
    """Fit min-max statistics on the table and encode it."""
    if schema is not None and schema is not table.schema:
        table = Table(schema=schema, columns=table.columns)
    scaler = fit_scaler(table)
    return encode(table, scaler), scaler


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def decode(matrix: np.ndarray, scaler: ColumnScaler, schema: TableSchema) -> Table:
    """Map an encoded (or generated) matrix back to a table.

    Numerical slots are clamped to [0, 1] and inverse min-max scaled;
    categorical blocks pass through softmax and resolve to the argmax
    category.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[1] != schema.encoded_width:
        raise WidthMismatch(schema.encoded_width, matrix.shape[1])
    n = matrix.shape[0]
    columns = {}
    offset = 0
    for col in schema.columns:
        block = matrix[:, offset:offset + col.width]
        offset += col.width
        if col.kind == "numerical":
            lo, hi = scaler.mins[col.name], scaler.maxs[col.name]
            clamped = np.clip(block[:, 0], 0.0, 1.0)
            columns[col.name] = lo + clamped * (hi - lo)
        else:
            probs = softmax(block, axis=1)
            picks = np.argmax(probs, axis=1)  # np.argmax ties -> lowest index
            cats = np.asarray(col.categories, dtype=object)
            columns[col.name] = cats[picks]
    return Table(schema=schema, columns=columns)
