"""In-memory relational instances with an endogenous/exogenous tuple partition."""

from __future__ import annotations

import csv
import itertools
import operator
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DataError, SchemaError
from .query import ENDOGENOUS, EXOGENOUS, Query, RelationSchema, Schema

_BARE = re.compile(r"[A-Za-z0-9_.\-]+")


def format_value(value: str) -> str:
    if _BARE.fullmatch(value):
        return value
    return "'" + value.replace("'", "\\'") + "'"


@dataclass(frozen=True)
class TupleRow:
    id: int
    relation: str
    values: tuple[str, ...]
    endo: bool = True

    @property
    def ref(self) -> str:
        return f"{self.relation}({','.join(format_value(v) for v in self.values)})"

    def __str__(self) -> str:
        return self.ref


class Database:
    """An immutable set of tuples, each flagged endogenous or exogenous.

    Rows are grouped by relation; ``(relation, values)`` pairs are unique and
    ids are unique across the instance.
    """

    def __init__(
        self,
        rows: Iterable[TupleRow] = (),
        schema: Schema | None = None,
        candidate: bool = False,
        truncated: bool = False,
    ):
        rels: dict[str, list[TupleRow]] = {}
        self._by_id: dict[int, TupleRow] = {}
        self._index: dict[tuple[str, tuple[str, ...]], TupleRow] = {}
        for row in rows:
            key = (row.relation, row.values)
            if key in self._index:
                raise DataError(f"duplicate tuple {row.ref}")
            if row.id in self._by_id:
                raise DataError(f"duplicate tuple id {row.id}")
            self._index[key] = row
            self._by_id[row.id] = row
            rels.setdefault(row.relation, []).append(row)
        if schema is not None:
            for name in schema.relations:
                rels.setdefault(name, [])
        self.relations: dict[str, tuple[TupleRow, ...]] = {k: tuple(v) for k, v in rels.items()}
        self.schema = schema
        self.candidate = candidate
        self.truncated = truncated

    @classmethod
    def build(
        cls,
        relations: Mapping[str, Iterable[Sequence]],
        exogenous: Mapping[str, Iterable[Sequence]] | Iterable[str] = (),
        candidate: bool = False,
        start_id: int = 0,
    ) -> "Database":
        """Convenience constructor.

        ``exogenous`` is either a collection of relation names (whole relation
        exogenous) or a mapping from relation to the exogenous rows.
        """
        if isinstance(exogenous, Mapping):
            exo = {(r, tuple(str(v) for v in vals)) for r, rows in exogenous.items() for vals in rows}
            whole: set[str] = set()
        else:
            exo = set()
            whole = set(exogenous)
        rows = []
        next_id = start_id
        for rel, tuples in relations.items():
            for vals in tuples:
                vals = tuple(str(v) for v in vals)
                endo = rel not in whole and (rel, vals) not in exo
                rows.append(TupleRow(next_id, rel, vals, endo))
                next_id += 1
        db = cls(rows, candidate=candidate)
        for rel in relations:
            db.relations.setdefault(rel, ())
        return db

    # -- access -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[TupleRow]:
        for rel in sorted(self.relations):
            yield from self.relations[rel]

    def __contains__(self, row) -> bool:
        if isinstance(row, TupleRow):
            return self._index.get((row.relation, row.values)) is not None
        return row in self._by_id

    def __eq__(self, other) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        return self.signature() == other.signature()

    def __repr__(self) -> str:
        parts = ", ".join(f"{r}:{len(rows)}" for r, rows in sorted(self.relations.items()))
        return f"Database({parts})"

    def signature(self) -> frozenset:
        """Content without ids; two loads of the same files compare equal."""
        return frozenset((r.relation, r.values, r.endo) for r in self._by_id.values())

    def rows(self, relation: str) -> tuple[TupleRow, ...]:
        return self.relations.get(relation, ())

    def get(self, tid: int) -> TupleRow:
        return self._by_id[tid]

    def find(self, relation: str, values: Sequence) -> TupleRow | None:
        return self._index.get((relation, tuple(str(v) for v in values)))

    def ref(self, tid: int) -> str:
        return self._by_id[tid].ref

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(self._by_id)

    @property
    def endogenous(self) -> frozenset[int]:
        return frozenset(i for i, r in self._by_id.items() if r.endo)

    @property
    def exogenous(self) -> frozenset[int]:
        return frozenset(i for i, r in self._by_id.items() if not r.endo)

    @property
    def max_id(self) -> int:
        return max(self._by_id, default=-1)

    # -- derived instances --------------------------------------------------

    def _derive(self, rows: Iterable[TupleRow], **kw) -> "Database":
        db = Database(rows, self.schema, kw.get("candidate", self.candidate), kw.get("truncated", False))
        for rel in self.relations:
            db.relations.setdefault(rel, ())
        return db

    def without(self, ids: Iterable[int]) -> "Database":
        drop = set(ids)
        return self._derive(r for r in self._by_id.values() if r.id not in drop)

    def only(self, ids: Iterable[int]) -> "Database":
        keep = set(ids)
        return self._derive(r for r in self._by_id.values() if r.id in keep)

    def exogenous_part(self) -> "Database":
        return self._derive(r for r in self._by_id.values() if not r.endo)

    def union(self, other: "Database") -> "Database":
        """Disjoint union; ``other`` rows keep their ids when those are free."""
        rows = list(self._by_id.values())
        taken = set(self._by_id)
        next_id = max(self.max_id, other.max_id) + 1
        for row in other._by_id.values():
            if (row.relation, row.values) in self._index:
                raise DataError(f"tuple {row.ref} occurs in both instances")
            if row.id in taken:
                row = replace(row, id=next_id)
                next_id += 1
            taken.add(row.id)
            rows.append(row)
        db = self._derive(rows, candidate=False)
        for rel in other.relations:
            db.relations.setdefault(rel, ())
        return db

    def with_flags(self, flags: Mapping[str, bool]) -> "Database":
        """Force every tuple of the named relations to the given endo flag."""
        if not flags:
            return self
        return self._derive(
            replace(r, endo=flags[r.relation]) if r.relation in flags else r for r in self._by_id.values()
        )


def active_domain(db: Database) -> frozenset[str]:
    return frozenset(v for row in db for v in row.values)


def resolve_partition(q: Query, db: Database) -> Database:
    """Apply the query's annotations to the tuple flags.

    Precedence: per-atom marker, then query directive, then schema default,
    then the per-tuple flag already stored in ``db``.
    """
    flags: dict[str, bool] = {}
    for rel in q.relations:
        markers = {a.annotation for a in q.atoms if a.relation == rel and a.annotation}
        if len(markers) > 1:
            raise SchemaError(f"relation {rel} is marked both endogenous and exogenous")
        ann = next(iter(markers), None) or q.directive_for(rel)
        if ann is None and db.schema is not None and rel in db.schema:
            ann = db.schema[rel].default
        if ann is not None:
            flags[rel] = ann == ENDOGENOUS
    return db.with_flags(flags)


# -- annotation files ------------------------------------------------------

_OPS = {
    "=": operator.eq,
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_COND = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(==|!=|<=|>=|=|<|>)\s*(.+?)\s*$")


@dataclass(frozen=True)
class AnnotationRule:
    """One line of an annotation file: ``endo Rel where col=value``,
    ``endo Rel rows 3,5,9`` or ``exo Rel *``.  Later lines win."""

    endo: bool
    relation: str
    conditions: tuple[tuple[str, str, str], ...] = ()
    rows: frozenset[int] | None = None

    def matches(self, relation: RelationSchema, row_number: int, values: Sequence[str]) -> bool:
        if relation.name != self.relation:
            return False
        if self.rows is not None:
            return row_number in self.rows
        for col, op, literal in self.conditions:
            try:
                value = values[relation.columns.index(col)]
            except ValueError:
                raise DataError(f"annotation refers to unknown column {relation.name}.{col}") from None
            if not _compare(value, op, literal):
                return False
        return True


def _compare(value: str, op: str, literal: str) -> bool:
    try:
        return _OPS[op](float(value), float(literal))
    except ValueError:
        return _OPS[op](value, literal)


def parse_annotations(text: str, source: str = "<annotations>") -> list[AnnotationRule]:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 3 or parts[0].lower() not in ("endo", "exo"):
            raise DataError(f"{source}:{lineno}: expected 'endo|exo Rel (*|where ...|rows ...)'")
        endo = parts[0].lower() == "endo"
        rel, rest = parts[1], parts[2].strip()
        if rest == "*":
            rules.append(AnnotationRule(endo, rel))
        elif rest.startswith("rows"):
            try:
                nums = frozenset(int(n) for n in rest[4:].replace(" ", "").split(",") if n)
            except ValueError:
                raise DataError(f"{source}:{lineno}: bad row list {rest[4:]!r}") from None
            rules.append(AnnotationRule(endo, rel, rows=nums))
        elif rest.startswith("where"):
            conds = []
            for clause in re.split(r"\s+and\s+", rest[5:].strip()):
                m = _COND.match(clause)
                if not m:
                    raise DataError(f"{source}:{lineno}: bad condition {clause!r}")
                col, op, lit = m.groups()
                if len(lit) >= 2 and lit[0] == lit[-1] and lit[0] in "'\"":
                    lit = lit[1:-1]
                conds.append((col, op, lit))
            rules.append(AnnotationRule(endo, rel, tuple(conds)))
        else:
            raise DataError(f"{source}:{lineno}: expected '*', 'where' or 'rows' after {rel}")
    return rules


# -- CSV loading -----------------------------------------------------------


def _read_csv(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            data = []
            for rec in reader:
                if rec:
                    data.append((reader.line_num, rec))
    except FileNotFoundError:
        raise DataError(f"missing file {path}") from None
    except csv.Error as exc:
        raise DataError(f"{path}: {exc}") from None
    if header is None:
        raise DataError(f"{path}: missing header row")
    return [h.strip() for h in header], data


def infer_schema(sources: Iterable[str | Path]) -> Schema:
    rels = {}
    for src in sources:
        path = Path(src)
        header, _ = _read_csv(path)
        rels[path.stem] = RelationSchema(path.stem, tuple(header))
    return Schema(rels)


def load(
    schema: Schema | None,
    sources: Iterable[str | Path],
    annotations: str | Path | Sequence[AnnotationRule] | None = None,
) -> Database:
    """Load one CSV per relation (relation name = file stem).

    Tuples default to endogenous; annotation rules then set per-tuple flags.
    Ids are assigned in file order, files taken in the order given.
    """
    sources = [Path(s) for s in sources]
    if schema is None:
        schema = infer_schema(sources)
    if annotations is None:
        rules: Sequence[AnnotationRule] = ()
    elif isinstance(annotations, (str, Path)) and Path(annotations).exists():
        rules = parse_annotations(Path(annotations).read_text(encoding="utf-8"), str(annotations))
    elif isinstance(annotations, (str, Path)):
        raise DataError(f"missing annotation file {annotations}")
    else:
        rules = annotations
    for rule in rules:
        if rule.relation not in schema:
            raise DataError(f"annotation refers to unknown relation {rule.relation}")

    rows: list[TupleRow] = []
    seen: dict[tuple[str, tuple[str, ...]], TupleRow] = {}
    next_id = 0
    for path in sources:
        rel = schema.relations.get(path.stem)
        if rel is None:
            raise DataError(f"{path}: relation {path.stem} is not in the schema")
        header, data = _read_csv(path)
        if tuple(header) != rel.columns:
            raise DataError(f"{path}:1: header {header} does not match schema columns {list(rel.columns)}")
        for number, (line, rec) in enumerate(data, 1):
            if len(rec) != rel.arity:
                raise DataError(f"{path}:{line}: expected {rel.arity} values, got {len(rec)}")
            values = tuple(v.strip() for v in rec)
            endo = True
            for rule in rules:
                if rule.matches(rel, number, values):
                    endo = rule.endo
            key = (rel.name, values)
            prev = seen.get(key)
            if prev is not None:
                if prev.endo != endo:
                    raise DataError(f"{path}:{line}: tuple {prev.ref} flagged both endogenous and exogenous")
                continue
            row = TupleRow(next_id, rel.name, values, endo)
            next_id += 1
            seen[key] = row
            rows.append(row)
    return Database(rows, schema)


def load_directory(directory: str | Path, annotations=None, schema: Schema | None = None) -> Database:
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise DataError(f"no CSV files in {directory}")
    return load(schema, paths, annotations)


def load_candidates(path: str | Path, db: Database) -> Database:
    """Read a Why-No candidate pool: CSV rows ``Rel,v1,...,vk``.

    An optional first line starting with ``relation`` is skipped.  All
    candidates are endogenous; ids continue after ``db``'s ids.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"missing file {path}") from None
    rows = []
    next_id = db.max_id + 1
    for lineno, rec in enumerate(csv.reader(text.splitlines()), 1):
        if not rec or (lineno == 1 and rec[0].strip().lower() == "relation"):
            continue
        rel, values = rec[0].strip(), tuple(v.strip() for v in rec[1:])
        if db.schema is not None and rel in db.schema and db.schema[rel].arity != len(values):
            raise DataError(f"{path}:{lineno}: {rel} expects {db.schema[rel].arity} values")
        rows.append(TupleRow(next_id, rel, values, True))
        next_id += 1
    return Database(rows, candidate=True)


def generate_whyno_candidates(db: Database, q: Query, limit: int) -> Database:
    """Naive candidate pool: every tuple over the active domain that fits an atom.

    Constant positions and repeated variables of each atom are respected.
    The result is sorted lexicographically and cut at ``limit``; the
    ``truncated`` flag records whether anything was dropped.
    """
    if not q.is_boolean:
        raise SchemaError("candidate generation needs a Boolean query")
    adom = sorted(active_domain(db) | {t.name for a in q.atoms for t in a.terms if not t.is_var})
    found: set[tuple[str, tuple[str, ...]]] = set()
    for atom in q.atoms:
        varpos = atom.variables
        for combo in itertools.product(adom, repeat=len(varpos)):
            binding = dict(zip(varpos, combo))
            values = tuple(binding[t.name] if t.is_var else t.name for t in atom.terms)
            if db.find(atom.relation, values) is None:
                found.add((atom.relation, values))
    ordered = sorted(found)
    truncated = len(ordered) > limit
    start = db.max_id + 1
    rows = [TupleRow(start + i, rel, vals, True) for i, (rel, vals) in enumerate(ordered[: max(limit, 0)])]
    return Database(rows, candidate=True, truncated=truncated)
