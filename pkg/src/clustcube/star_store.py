"""Star-schema store: typed CSV tables, manifest loading and validation.

The store holds one fact table and its dimension tables as immutable,
fully typed values.  A JSON manifest declares the star: table columns and
types, the fact table, the foreign keys linking fact to dimensions,
dimension hierarchies, and the fact measures.  CSV files supply the rows
(UTF-8, RFC 4180, header row first; an empty field is the null marker,
which also means empty text strings are not representable, and NUL
characters are rejected by the CSV layer in both directions).

Nulls are rejected in dimension key and fact foreign-key columns at ingest
time because every later join assumes total key semantics.  Everything
else about star health (dangling foreign keys, hierarchy functional
dependencies, non-numeric measures) is reported by ``validate_star``
rather than raised.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional

from .errors import IngestError, ManifestError

Value = Any  # int | float | str | bool | None


class ColumnType(str, Enum):
    INTEGER = "integer"
    REAL = "real"
    TEXT = "text"
    BOOLEAN = "boolean"

    @property
    def is_numeric(self) -> bool:
        return self in (ColumnType.INTEGER, ColumnType.REAL)


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType


@dataclass(frozen=True)
class TableData:
    """One loaded table: declared columns plus typed row tuples."""

    name: str
    columns: tuple[Column, ...]
    rows: tuple[tuple[Value, ...], ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise IngestError(f"table {self.name!r} has duplicate column names")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise IngestError(f"table {self.name!r} row {i} has {len(row)} values, expected {len(self.columns)}")

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise IngestError(f"table {self.name!r} has no column {name!r}")

    def column_values(self, name: str) -> list[Value]:
        i = self.column_index(name)
        return [r[i] for r in self.rows]


@dataclass(frozen=True)
class Hierarchy:
    """Ordered levels of one dimension, finest first (e.g. city < region < country)."""

    dimension: str
    levels: tuple[str, ...]


@dataclass(frozen=True)
class DimensionLink:
    table: str
    fact_fk: str
    dim_key: str


@dataclass(frozen=True)
class StarSchema:
    fact: str
    dimensions: tuple[DimensionLink, ...]
    hierarchies: tuple[Hierarchy, ...]
    measures: tuple[str, ...]
    #: declared columns per table; ingest checks CSV headers against these
    tables: dict[str, tuple[Column, ...]] = field(default_factory=dict)

    def dimension(self, table: str) -> DimensionLink:
        for d in self.dimensions:
            if d.table == table:
                return d
        raise ManifestError(f"no dimension table named {table!r}")

    def hierarchy_for(self, dimension: str) -> Optional[Hierarchy]:
        for h in self.hierarchies:
            if h.dimension == dimension:
                return h
        return None

    def table_columns(self, table: str) -> tuple[Column, ...]:
        try:
            return self.tables[table]
        except KeyError:
            raise ManifestError(f"unknown table reference {table!r}") from None


@dataclass(frozen=True)
class StarData:
    """A schema together with all its loaded tables (an immutable snapshot)."""

    schema: StarSchema
    tables: dict[str, TableData]

    def table(self, name: str) -> TableData:
        try:
            return self.tables[name]
        except KeyError:
            raise ManifestError(f"table {name!r} is not loaded") from None


# ---------------------------------------------------------------------------
# Manifest


def load_schema_manifest(path: str | Path) -> StarSchema:
    """Parse a JSON star manifest and cross-check all internal references.

    The manifest carries ``fact``, ``dimensions`` ``[{table, fact_fk,
    dim_key}]``, ``hierarchies`` ``[{dimension, levels}]``, ``measures``
    and ``tables`` ``{name: [{name, type}]}``.  Only the manifest is read;
    CSV data files are untouched.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest syntax error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be a JSON object")

    for key in ("fact", "dimensions", "hierarchies", "measures", "tables"):
        if key not in doc:
            raise ManifestError(f"manifest missing required key {key!r}")

    tables: dict[str, tuple[Column, ...]] = {}
    for tname, cols in doc["tables"].items():
        parsed = []
        seen = set()
        for c in cols:
            try:
                ctype = ColumnType(c["type"])
            except ValueError:
                raise ManifestError(f"table {tname!r} column {c.get('name')!r} has unknown type {c.get('type')!r}") from None
            if c["name"] in seen:
                raise ManifestError(f"table {tname!r} declares column {c['name']!r} twice")
            seen.add(c["name"])
            parsed.append(Column(c["name"], ctype))
        tables[tname] = tuple(parsed)

    def check_column(table: str, column: str, context: str) -> Column:
        if table not in tables:
            raise ManifestError(f"{context} references unknown table {table!r}")
        for col in tables[table]:
            if col.name == column:
                return col
        raise ManifestError(f"{context} references unknown column {column!r} of table {table!r}")

    fact = doc["fact"]
    if fact not in tables:
        raise ManifestError(f"fact table {fact!r} is not declared under 'tables'")

    dimensions = []
    seen_tables: set[str] = set()
    for d in doc["dimensions"]:
        link = DimensionLink(d["table"], d["fact_fk"], d["dim_key"])
        if link.table in seen_tables:
            raise ManifestError(f"dimension table {link.table!r} linked to the fact more than once")
        seen_tables.add(link.table)
        check_column(fact, link.fact_fk, f"dimension {link.table!r} foreign key")
        check_column(link.table, link.dim_key, f"dimension {link.table!r} key")
        dimensions.append(link)

    hierarchies = []
    for h in doc["hierarchies"]:
        dim = h["dimension"]
        if dim not in seen_tables:
            raise ManifestError(f"hierarchy references unknown dimension table {dim!r}")
        levels = tuple(h["levels"])
        if not levels:
            raise ManifestError(f"hierarchy for {dim!r} has no levels")
        if len(set(levels)) != len(levels):
            raise ManifestError(f"hierarchy for {dim!r} repeats a level name")
        for level in levels:
            check_column(dim, level, f"hierarchy for {dim!r}")
        hierarchies.append(Hierarchy(dim, levels))

    measures = tuple(doc["measures"])
    for m in measures:
        col = check_column(fact, m, "measure")
        if not col.type.is_numeric:
            raise ManifestError(f"measure {m!r} must be numeric, got {col.type.value}")

    return StarSchema(fact=fact, dimensions=tuple(dimensions), hierarchies=tuple(hierarchies),
                      measures=measures, tables=tables)


# ---------------------------------------------------------------------------
# CSV ingest / export


def _coerce(text: str, ctype: ColumnType, table: str, row: int, column: str) -> Value:
    if text == "":
        return None
    try:
        if ctype is ColumnType.INTEGER:
            return int(text)
        if ctype is ColumnType.REAL:
            return float(text)
        if ctype is ColumnType.BOOLEAN:
            low = text.lower()
            if low == "true":
                return True
            if low == "false":
                return False
            raise ValueError(text)
        return text
    except ValueError:
        raise IngestError(f"cannot coerce {text!r} to {ctype.value} at table {table!r}, row {row}, column {column!r}") from None


def ingest_csv(schema: StarSchema, table: str, path: str | Path) -> TableData:
    """Load one declared table from CSV, coercing every cell to its type.

    The header must match the declared columns exactly (same names, same
    order).  Dimension primary keys must be unique and non-null; fact
    foreign keys must be non-null.
    """
    columns = schema.table_columns(table)
    declared = [c.name for c in columns]

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"table {table!r}: CSV file {path} is empty (missing header)") from None
        if header != declared:
            raise IngestError(f"table {table!r}: header {header!r} does not match declared columns {declared!r}")
        rows = []
        for rownum, record in enumerate(reader):
            if len(record) != len(columns):
                raise IngestError(f"table {table!r} row {rownum}: {len(record)} fields, expected {len(columns)}")
            rows.append(tuple(_coerce(cell, col.type, table, rownum, col.name)
                              for cell, col in zip(record, columns)))

    no_null_cols: list[str] = []
    if table == schema.fact:
        no_null_cols = [d.fact_fk for d in schema.dimensions]
    else:
        for d in schema.dimensions:
            if d.table == table:
                no_null_cols = [d.dim_key]
                break

    data = TableData(name=table, columns=columns, rows=tuple(rows))
    for colname in no_null_cols:
        idx = data.column_index(colname)
        for rownum, row in enumerate(rows):
            if row[idx] is None:
                raise IngestError(f"table {table!r} row {rownum}: null in key column {colname!r}")

    for d in schema.dimensions:
        if d.table == table:
            idx = data.column_index(d.dim_key)
            seen: set[Value] = set()
            for rownum, row in enumerate(rows):
                if row[idx] in seen:
                    raise IngestError(f"table {table!r} row {rownum}: duplicate primary key {row[idx]!r}")
                seen.add(row[idx])
    return data


def format_value(value: Value, ctype: ColumnType) -> str:
    """CSV text for one cell; inverse of ``_coerce`` for representable values."""
    if value is None:
        return ""
    if ctype is ColumnType.BOOLEAN:
        return "true" if value else "false"
    if ctype is ColumnType.REAL:
        return repr(float(value))  # shortest round-trip decimal, bit-exact on re-parse
    return str(value)


def export_csv(table: TableData, path: str | Path) -> None:
    """Write a table back to CSV such that re-ingesting reproduces it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([c.name for c in table.columns])
        for row in table.rows:
            writer.writerow([format_value(v, c.type) for v, c in zip(row, table.columns)])


def load_star_data(data_dir: str | Path, manifest_name: str = "schema.json") -> StarData:
    """Load the manifest plus one ``<table>.csv`` per declared table."""
    data_dir = Path(data_dir)
    schema = load_schema_manifest(data_dir / manifest_name)
    tables = {}
    for name in schema.tables:
        tables[name] = ingest_csv(schema, name, data_dir / f"{name}.csv")
    return StarData(schema=schema, tables=tables)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    kind: str  # foreign_key | hierarchy_fd | measure_type
    table: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "violations": [{"kind": v.kind, "table": v.table, "detail": v.detail} for v in self.violations]}


def validate_star(schema: StarSchema, tables: dict[str, TableData]) -> ValidationReport:
    """Scan the loaded star for integrity violations.

    Violations are report content, never exceptions: dangling fact foreign
    keys, hierarchy level pairs that fail the finer-to-coarser functional
    dependency, and measures whose declared type is not numeric.
    """
    out: list[Violation] = []
    fact = tables.get(schema.fact)
    if fact is None:
        raise ManifestError(f"fact table {schema.fact!r} is not loaded")

    for link in schema.dimensions:
        dim = tables.get(link.table)
        if dim is None:
            raise ManifestError(f"dimension table {link.table!r} is not loaded")
        keys = set(dim.column_values(link.dim_key))
        fk_idx = fact.column_index(link.fact_fk)
        for rownum, row in enumerate(fact.rows):
            if row[fk_idx] not in keys:
                out.append(Violation("foreign_key", schema.fact,
                                     f"row {rownum}: {link.fact_fk}={row[fk_idx]!r} not found in {link.table}.{link.dim_key}"))

    for h in schema.hierarchies:
        dim = tables.get(h.dimension)
        if dim is None:
            raise ManifestError(f"dimension table {h.dimension!r} is not loaded")
        for finer, coarser in zip(h.levels, h.levels[1:]):
            fi, ci = dim.column_index(finer), dim.column_index(coarser)
            mapping: dict[Value, Value] = {}
            for rownum, row in enumerate(dim.rows):
                fv, cv = row[fi], row[ci]
                if fv in mapping and mapping[fv] != cv:
                    out.append(Violation("hierarchy_fd", h.dimension,
                                         f"{finer}={fv!r} maps to both {mapping[fv]!r} and {cv!r} in {coarser}"))
                else:
                    mapping[fv] = cv

    for m in schema.measures:
        col = next((c for c in fact.columns if c.name == m), None)
        if col is None or not col.type.is_numeric:
            out.append(Violation("measure_type", schema.fact,
                                 f"measure {m!r} is missing or not numeric"))

    return ValidationReport(tuple(out))


def table_to_dicts(table: TableData) -> list[dict[str, Value]]:
    names = [c.name for c in table.columns]
    return [dict(zip(names, row)) for row in table.rows]


def rows_as_index(table: TableData, key_column: str) -> dict[Value, tuple[Value, ...]]:
    """Unique-key lookup; assumes the key column passed ingest uniqueness."""
    idx = table.column_index(key_column)
    return {row[idx]: row for row in table.rows}


def iter_tables(data: StarData) -> Iterable[TableData]:
    return data.tables.values()
