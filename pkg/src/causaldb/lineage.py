"""Valuations, positive DNF lineage and the endogenous restriction of it."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping

from ._join import join
from .errors import SchemaError
from .query import Query
from .storage import Database


@dataclass(frozen=True)
class Valuation:
    binding: tuple[tuple[str, str], ...]
    tuples: tuple[int, ...]  # tuple id matched by each atom, in atom order

    @property
    def conjunct(self) -> frozenset[int]:
        return frozenset(self.tuples)

    def as_dict(self) -> dict[str, str]:
        return dict(self.binding)


def _rows_of(db: Database):
    def rows(relation: str):
        return ((r.values, r.id) for r in db.rows(relation))

    return rows


def iter_valuations(q: Query, db: Database):
    if not q.is_boolean:
        raise SchemaError(f"{q.name} has head variables; specialize it to an answer first")
    order = q.variables
    for binding, ids in join(q.atoms, _rows_of(db)):
        yield Valuation(tuple((v, binding[v]) for v in order), ids)


def valuations(q: Query, db: Database) -> list[Valuation]:
    """All homomorphisms from the atoms of ``q`` into ``db``, sorted by binding."""
    return sorted(iter_valuations(q, db), key=lambda v: ([b for _, b in v.binding], v.tuples))


def holds(q: Query, db: Database) -> bool:
    for _ in iter_valuations(q, db):
        return True
    return False


@dataclass(frozen=True)
class Dnf:
    """A positive DNF over tuple ids.

    The empty DNF is false; a DNF holding the empty conjunct is trivially true.
    """

    conjuncts: frozenset[frozenset[int]]

    @classmethod
    def of(cls, conjuncts: Iterable[Iterable[int]]) -> "Dnf":
        return cls(frozenset(frozenset(c) for c in conjuncts))

    def __len__(self) -> int:
        return len(self.conjuncts)

    def __iter__(self):
        return iter(self.sorted())

    @property
    def satisfiable(self) -> bool:
        return bool(self.conjuncts)

    @property
    def trivially_true(self) -> bool:
        return frozenset() in self.conjuncts

    @property
    def variables(self) -> frozenset[int]:
        return frozenset().union(*self.conjuncts) if self.conjuncts else frozenset()

    def sorted(self) -> list[tuple[int, ...]]:
        return sorted((tuple(sorted(c)) for c in self.conjuncts), key=lambda c: (len(c), c))

    def evaluate(self, true_ids) -> bool:
        """Value under the assignment that makes exactly ``true_ids`` true."""
        return any(c <= true_ids for c in self.conjuncts)

    def survives(self, removed) -> bool:
        """Value after deleting ``removed`` (every other variable stays true)."""
        return any(c.isdisjoint(removed) for c in self.conjuncts)

    def to_json(self, db: Database) -> dict:
        return {"conjuncts": [sorted(db.ref(t) for t in c) for c in self.sorted()]}

    def render(self, db: Database) -> str:
        if not self.conjuncts:
            return "false"
        parts = []
        for c in self.sorted():
            parts.append(" ∧ ".join(db.ref(t) for t in sorted(c, key=db.ref)) if c else "true")
        return " ∨ ".join(parts)


def lineage(q: Query, db: Database) -> Dnf:
    return Dnf(frozenset(v.conjunct for v in iter_valuations(q, db)))


def n_lineage(phi: Dnf, db: Database) -> Dnf:
    """Set every exogenous variable to true."""
    exo = db.exogenous
    if not exo:
        return phi
    return Dnf(frozenset(c - exo for c in phi.conjuncts))


def remove_redundant(phi: Dnf) -> Dnf:
    """Drop every conjunct that strictly contains another one."""
    conj = phi.conjuncts
    if frozenset() in conj:
        return Dnf(frozenset([frozenset()]))
    buckets: dict[int, list[frozenset[int]]] = {}
    for c in conj:
        buckets.setdefault(len(c), []).append(c)
    sizes = sorted(buckets)
    kept = []
    for c in conj:
        n = len(c)
        redundant = False
        for s in sizes:
            if s >= n:
                break
            bucket = buckets[s]
            if comb(n, s) <= len(bucket):
                redundant = any(frozenset(sub) in conj for sub in itertools.combinations(c, s))
            else:
                redundant = any(b < c for b in bucket)
            if redundant:
                break
        if not redundant:
            kept.append(c)
    return Dnf(frozenset(kept))


def minimal_n_lineage(q: Query, db: Database) -> Dnf:
    return remove_redundant(n_lineage(lineage(q, db), db))


def lineage_by_relation(phi: Dnf, db: Database) -> Mapping[str, frozenset[int]]:
    out: dict[str, set[int]] = {}
    for t in phi.variables:
        out.setdefault(db.get(t).relation, set()).add(t)
    return {k: frozenset(v) for k, v in out.items()}
