"""Object-definition queries: parse, compose, derive schemas, materialize.

Complex objects are tuples assembled across the fact table and its
dimensions.  They are described by a small SQL dialect::

    SELECT <alias>.<col> AS <name>:<role> (, ...)*
    FROM <fact> <alias>
    (JOIN <table> <alias> ON <a>.<col> = <b>.<col>)*

Keywords are case-insensitive, identifiers are ``[A-Za-z_][A-Za-z0-9_]*``
and case-sensitive.  Roles tag each output attribute for the analysis
layers: ``coordinate`` (cube placement), ``feature`` (clustering and
regression predictors), ``target`` (regression response), ``carry``
(kept but unanalysed).

Several queries over the same fact table compose into one global query;
its projection list concatenates the parts and duplicate join edges
collapse.  Materialization runs the joins (inner semantics, hash lookup
on the joined table's column) and yields one object per surviving fact
row, in fact-row order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CodqSyntaxError, ResolutionError
from .star_store import ColumnType, StarSchema, TableData, Value

ROLES = ("coordinate", "feature", "target", "carry")


@dataclass(frozen=True)
class JoinEdge:
    """One join step; ``right_table`` is the table being brought in."""

    left_table: str
    left_column: str
    right_table: str
    right_column: str


@dataclass(frozen=True)
class Projection:
    table: str
    column: str
    name: str
    role: str


@dataclass(frozen=True)
class CodqSpec:
    fact: str
    joins: tuple[JoinEdge, ...]
    projections: tuple[Projection, ...]

    def __post_init__(self):
        if not self.projections:
            raise CodqSyntaxError("query must project at least one attribute", 0)
        names = [p.name for p in self.projections]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ResolutionError(f"duplicate output attribute name {dup!r}")


@dataclass(frozen=True)
class GlobalCodq:
    """Several specs over one fact table, merged into a single query."""

    parts: tuple[CodqSpec, ...]
    fact: str
    joins: tuple[JoinEdge, ...]
    projections: tuple[Projection, ...]


@dataclass(frozen=True)
class Attribute:
    name: str
    type: ColumnType
    role: str
    source_table: str
    source_column: str


@dataclass(frozen=True)
class ObjectSchema:
    attributes: tuple[Attribute, ...]

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise ResolutionError(f"object schema has no attribute {name!r}")

    def with_role(self, role: str) -> list[Attribute]:
        return [a for a in self.attributes if a.role == role]


@dataclass(frozen=True)
class ObjectSet:
    schema: ObjectSchema
    objects: tuple[tuple[Value, ...], ...]

    def __post_init__(self):
        coord_idx = [i for i, a in enumerate(self.schema.attributes) if a.role == "coordinate"]
        for n, obj in enumerate(self.objects):
            for i in coord_idx:
                if obj[i] is None:
                    raise ResolutionError(
                        f"object {n} has null in coordinate attribute {self.schema.attributes[i].name!r}")

    def __len__(self) -> int:
        return len(self.objects)

    def column(self, name: str) -> list[Value]:
        i = self.schema.index_of(name)
        return [o[i] for o in self.objects]


# ---------------------------------------------------------------------------
# Tokenizer


_TOKEN_RE = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[.,:=]))")
_KEYWORDS = {"select", "from", "join", "on", "as"}


@dataclass(frozen=True)
class _Token:
    kind: str  # keyword text, 'ident', '.', ',', ':', '=', 'eof'
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            offset = len(text) - len(stripped)
            raise CodqSyntaxError(f"unexpected character {stripped[0]!r}", offset)
        if m.group("ident") is not None:
            word = m.group("ident")
            kind = word.lower() if word.lower() in _KEYWORDS else "ident"
            tokens.append(_Token(kind, word, m.start("ident")))
        else:
            tokens.append(_Token(m.group("punct"), m.group("punct"), m.start("punct")))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self, *kinds: str) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind not in kinds:
            raise CodqSyntaxError(f"unexpected {tok.text or 'end of query'!r}", tok.offset, frozenset(kinds))
        self.pos += 1
        return tok

    def parse(self) -> CodqSpec:
        self.take("select")
        raw_projs = [self._projection()]
        while self.peek().kind == ",":
            self.take(",")
            raw_projs.append(self._projection())
        self.take("from")
        fact = self.take("ident").text
        aliases = {self.take("ident").text: fact}

        joins: list[JoinEdge] = []
        while self.peek().kind == "join":
            self.take("join")
            table = self.take("ident").text
            alias_tok = self.take("ident")
            if alias_tok.text in aliases and aliases[alias_tok.text] != table:
                raise CodqSyntaxError(f"alias {alias_tok.text!r} already bound to {aliases[alias_tok.text]!r}",
                                      alias_tok.offset)
            aliases[alias_tok.text] = table
            self.take("on")
            a_tok, a_col = self._qualified()
            self.take("=")
            b_tok, b_col = self._qualified()
            joins.append(self._normalize_join(aliases, alias_tok.text, a_tok, a_col, b_tok, b_col))
        self.take("eof")

        projections = []
        for alias_tok, col, name, role in raw_projs:
            if alias_tok.text not in aliases:
                raise CodqSyntaxError(f"unknown alias {alias_tok.text!r}", alias_tok.offset)
            projections.append(Projection(aliases[alias_tok.text], col, name, role))
        return CodqSpec(fact=fact, joins=tuple(joins), projections=tuple(projections))

    def _projection(self) -> tuple[_Token, str, str, str]:
        alias_tok = self.take("ident")
        self.take(".")
        col = self.take("ident").text
        self.take("as")
        name = self.take("ident").text
        self.take(":")
        role_tok = self.take("ident")
        if role_tok.text.lower() not in ROLES:
            raise CodqSyntaxError(f"unknown role {role_tok.text!r}", role_tok.offset, frozenset(ROLES))
        return alias_tok, col, name, role_tok.text.lower()

    def _qualified(self) -> tuple[_Token, str]:
        alias_tok = self.take("ident")
        self.take(".")
        col = self.take("ident").text
        return alias_tok, col

    def _normalize_join(self, aliases: dict[str, str], new_alias: str,
                        a_tok: _Token, a_col: str, b_tok: _Token, b_col: str) -> JoinEdge:
        for tok in (a_tok, b_tok):
            if tok.text not in aliases:
                raise CodqSyntaxError(f"unknown alias {tok.text!r}", tok.offset)
        a_is_new, b_is_new = a_tok.text == new_alias, b_tok.text == new_alias
        if a_is_new == b_is_new:
            raise CodqSyntaxError(
                f"join condition must link the joined table {aliases[new_alias]!r} to an earlier table",
                a_tok.offset)
        if a_is_new:
            return JoinEdge(aliases[b_tok.text], b_col, aliases[a_tok.text], a_col)
        return JoinEdge(aliases[a_tok.text], a_col, aliases[b_tok.text], b_col)


def parse_codq(text: str) -> CodqSpec:
    """Parse one query; aliases are resolved to table names in the result."""
    return _Parser(text).parse()


def print_codq(spec: CodqSpec) -> str:
    """Render a spec back to query text (tables serve as their own aliases)."""
    projs = ", ".join(f"{p.table}.{p.column} AS {p.name}:{p.role}" for p in spec.projections)
    out = f"SELECT {projs} FROM {spec.fact} {spec.fact}"
    for j in spec.joins:
        out += f" JOIN {j.right_table} {j.right_table} ON {j.left_table}.{j.left_column} = {j.right_table}.{j.right_column}"
    return out


# ---------------------------------------------------------------------------
# Composition and resolution


def compose_global(specs: Sequence[CodqSpec]) -> GlobalCodq:
    """Merge queries over one fact table into the singleton global query.

    Projections concatenate in input order; identical join edges are kept
    once (first occurrence).  Output attribute names must be globally
    unique.
    """
    if not specs:
        raise ResolutionError("cannot compose an empty list of queries")
    fact = specs[0].fact
    for s in specs[1:]:
        if s.fact != fact:
            raise ResolutionError(f"fact table mismatch: {s.fact!r} vs {fact!r}")
    joins: list[JoinEdge] = []
    seen_edges = set()
    projections: list[Projection] = []
    seen_names: set[str] = set()
    for s in specs:
        for j in s.joins:
            if j not in seen_edges:
                seen_edges.add(j)
                joins.append(j)
        for p in s.projections:
            if p.name in seen_names:
                raise ResolutionError(f"duplicate output attribute name {p.name!r} across composed queries")
            seen_names.add(p.name)
            projections.append(p)
    return GlobalCodq(parts=tuple(specs), fact=fact, joins=tuple(joins), projections=tuple(projections))


def derive_object_schema(q: GlobalCodq, schema: StarSchema) -> ObjectSchema:
    """Resolve every projected column against the star and type the attributes."""
    attrs = []
    for p in q.projections:
        if p.table not in schema.tables:
            raise ResolutionError(f"query references unknown table {p.table!r}")
        col = next((c for c in schema.tables[p.table] if c.name == p.column), None)
        if col is None:
            raise ResolutionError(f"query references unknown column {p.table}.{p.column}")
        attrs.append(Attribute(p.name, col.type, p.role, p.table, p.column))
    for j in q.joins:
        for table, column in ((j.left_table, j.left_column), (j.right_table, j.right_column)):
            if table not in schema.tables:
                raise ResolutionError(f"join references unknown table {table!r}")
            if all(c.name != column for c in schema.tables[table]):
                raise ResolutionError(f"join references unknown column {table}.{column}")
    return ObjectSchema(tuple(attrs))


def materialize_objects(q: GlobalCodq, tables: dict[str, TableData]) -> ObjectSet:
    """Run the joins and project one object per matched fact row.

    Inner-join semantics: fact rows that lose any join are dropped; a join
    value matching several right-side rows multiplies the bindings.  Null
    join keys never match.  Output order is fact-row major, then the
    joined table's row order per edge.
    """
    schema_cols = {name: {c.name: c for c in t.columns} for name, t in tables.items()}
    for p in q.projections:
        if p.table not in tables:
            raise ResolutionError(f"query references unknown table {p.table!r}")
        if p.column not in schema_cols[p.table]:
            raise ResolutionError(f"query references unknown column {p.table}.{p.column}")

    indexes = []
    for j in q.joins:
        right = tables.get(j.right_table)
        left = tables.get(j.left_table)
        if right is None or left is None:
            raise ResolutionError(f"join references unknown table {j.right_table if right is None else j.left_table!r}")
        ridx = right.column_index(j.right_column)
        index: dict[Value, list[tuple[Value, ...]]] = {}
        for row in right.rows:
            key = row[ridx]
            if key is None:
                continue
            index.setdefault(key, []).append(row)
        indexes.append((j, left.column_index(j.left_column), index))

    fact = tables[q.fact]
    bindings: list[dict[str, tuple[Value, ...]]] = [{q.fact: row} for row in fact.rows]
    for j, left_idx, index in indexes:
        next_bindings = []
        for b in bindings:
            key = b[j.left_table][left_idx]
            if key is None:
                continue
            for row in index.get(key, ()):
                nb = dict(b)
                nb[j.right_table] = row
                next_bindings.append(nb)
        bindings = next_bindings

    proj_idx = [(p.table, tables[p.table].column_index(p.column)) for p in q.projections]
    objects = tuple(tuple(b[t][i] for t, i in proj_idx) for b in bindings)

    # type the attributes from the loaded tables so the set is self-describing
    attrs = tuple(Attribute(p.name, schema_cols[p.table][p.column].type, p.role, p.table, p.column)
                  for p in q.projections)
    return ObjectSet(ObjectSchema(attrs), objects)


def subset(objects: ObjectSet, indices: Iterable[int]) -> ObjectSet:
    return ObjectSet(objects.schema, tuple(objects.objects[i] for i in indices))


def load_codq_file(path) -> CodqSpec:
    from pathlib import Path

    return parse_codq(Path(path).read_text(encoding="utf-8"))
