"""Table schemas and the raw (pre-encoding) table container.

A schema declares, in order, the columns of a table: numerical columns and
categorical columns with a fixed vocabulary. The encoded representation
devotes one slot to each numerical column and a one-hot block to each
categorical column, in schema order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

VALID_KINDS = ("numerical", "categorical")
VALID_TASKS = ("binary", "multiclass", "regression", "none")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise InputError(f"column {self.name!r}: kind must be one of {VALID_KINDS}")
        if self.kind == "categorical":
            if len(self.categories) < 2:
                raise InputError(f"column {self.name!r}: categorical vocabulary needs >= 2 entries")
            if len(set(self.categories)) != len(self.categories):
                raise InputError(f"column {self.name!r}: duplicate categories in vocabulary")
        elif self.categories:
            raise InputError(f"column {self.name!r}: numerical column cannot carry categories")

    @property
    def width(self) -> int:
        return len(self.categories) if self.kind == "categorical" else 1


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[Column, ...]
    target_column: str | None = None
    task: str = "none"

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if not names:
            raise InputError("schema has no columns")
        if len(set(names)) != len(names):
            raise InputError("duplicate column names in schema")
        if self.task not in VALID_TASKS:
            raise InputError(f"task must be one of {VALID_TASKS}")
        if self.target_column is not None and self.target_column not in names:
            raise InputError(f"target column {self.target_column!r} not in schema")

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def encoded_width(self) -> int:
        return sum(c.width for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise InputError(f"no column named {name!r}")

    def to_json_dict(self) -> dict:
        cols = []
        for c in self.columns:
            d = {"name": c.name, "kind": c.kind}
            if c.kind == "categorical":
                d["categories"] = list(c.categories)
            cols.append(d)
        return {"columns": cols, "target": self.target_column, "task": self.task}

    @classmethod
    def from_json_dict(cls, d: dict) -> "TableSchema":
        try:
            cols = tuple(
                Column(
                    name=c["name"],
                    kind=c["kind"],
                    categories=tuple(c.get("categories", ())),
                )
                for c in d["columns"]
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed schema JSON: {exc}") from exc
        return cls(columns=cols, target_column=d.get("target"), task=d.get("task", "none"))


def canonical_schema_bytes(schema: TableSchema) -> bytes:
    """Canonical JSON encoding used for digests: sorted keys, no whitespace."""
    return json.dumps(schema.to_json_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def schema_digest(schema: TableSchema) -> bytes:
    """SHA-256 of the canonical schema JSON (32 raw bytes)."""
    return hashlib.sha256(canonical_schema_bytes(schema)).digest()


def load_schema(path) -> TableSchema:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"schema file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"schema file {path} is not valid JSON: {exc}")
    return TableSchema.from_json_dict(d)


def save_schema(schema: TableSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class Table:
    """Columnar table: float64 arrays for numerical columns, object arrays of
    strings for categorical ones. Column order follows the schema."""

    schema: TableSchema
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    def rows(self):
        """Iterate rows as lists of cell values in schema order."""
        cols = [self.columns[c.name] for c in self.schema.columns]
        for i in range(self.n_rows):
            yield [col[i] for col in cols]
