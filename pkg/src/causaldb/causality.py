"""Why-So and Why-No causes of a Boolean query."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import IsAnAnswer, NotAnAnswer, NotApplicable
from .lineage import Dnf, holds, iter_valuations, lineage, minimal_n_lineage, n_lineage, remove_redundant
from .query import Query
from .storage import Database, resolve_partition

COUNTERFACTUAL = "counterfactual"
ACTUAL = "actual"


@dataclass(frozen=True)
class CauseReport:
    tuple: int
    ref: str
    kind: str
    witness: tuple[int, ...]

    @property
    def counterfactual(self) -> bool:
        return self.kind == COUNTERFACTUAL

    def to_json(self, db: Database) -> dict:
        return {"tuple": self.ref, "kind": self.kind, "witness": sorted(db.ref(t) for t in self.witness)}


def _reports(minimal: Dnf, db: Database) -> list[CauseReport]:
    if minimal.trivially_true or not minimal.satisfiable:
        return []
    conj = minimal.sorted()
    first: dict[int, tuple[int, ...]] = {}
    count: dict[int, int] = {}
    for c in conj:
        for t in c:
            first.setdefault(t, c)
            count[t] = count.get(t, 0) + 1
    out = []
    for t, witness in first.items():
        kind = COUNTERFACTUAL if count[t] == len(conj) else ACTUAL
        out.append(CauseReport(t, db.ref(t), kind, witness))
    out.sort(key=lambda r: (db.get(r.tuple).relation, db.get(r.tuple).values))
    return out


def why_so_causes(q: Query, db: Database) -> list[CauseReport]:
    """Endogenous tuples in some non-redundant conjunct of the n-lineage.

    A tuple is counterfactual when it sits in every such conjunct, which is
    the same as the query failing once the tuple is deleted.
    """
    db = resolve_partition(q, db)
    phi = lineage(q, db)
    if not phi.satisfiable:
        raise NotAnAnswer(f"{q} is false on this instance")
    return _reports(remove_redundant(n_lineage(phi, db)), db)


def whyno_instance(db_exo: Database, candidates: Database) -> Database:
    """Real tuples become exogenous, candidate tuples endogenous."""
    real = db_exo.with_flags({rel: False for rel in db_exo.relations})
    pool = candidates.with_flags({rel: True for rel in candidates.relations})
    return real.union(pool)


def why_no_causes(q: Query, db_exo: Database, candidates: Database) -> list[CauseReport]:
    """Candidate tuples whose insertion, possibly with others, makes ``q`` true.

    Tuple ids in the reports refer to ``whyno_instance(db_exo, candidates)``.
    """
    if holds(q, db_exo):
        raise IsAnAnswer(f"{q} already holds on the real database")
    db = whyno_instance(db_exo, candidates)
    return _reports(minimal_n_lineage(q, db), db)


def causes_by_relation(reports, db: Database) -> dict[str, frozenset[tuple[str, ...]]]:
    out: dict[str, set] = {}
    for r in reports:
        row = db.get(r.tuple)
        out.setdefault(row.relation, set()).add(row.values)
    return {k: frozenset(v) for k, v in out.items()}


def conjunctive_fast_path(q: Query, db: Database) -> dict[str, frozenset[tuple[str, ...]]]:
    """Causes without negation when no relation is mixed and no endogenous
    relation repeats: every valuation then yields a minimal conjunct."""
    db = resolve_partition(q, db)
    endo_rels = []
    for rel in q.relations:
        flags = {r.endo for r in db.rows(rel)}
        if len(flags) > 1:
            raise NotApplicable(f"relation {rel} mixes endogenous and exogenous tuples")
        if flags == {True}:
            endo_rels.append(rel)
            if sum(a.relation == rel for a in q.atoms) > 1:
                raise NotApplicable(f"endogenous relation {rel} occurs more than once")
    out: dict[str, set] = {rel: set() for rel in endo_rels}
    for v in iter_valuations(q, db):
        for tid in v.tuples:
            row = db.get(tid)
            if row.endo:
                out[row.relation].add(row.values)
    return {k: frozenset(v) for k, v in out.items()}
