"""Independent oracles and instance generators for the test-suite.

Everything here works from the definitions with plain loops, sharing no
code with the package except the data containers.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from pathlib import Path

from causaldb.query import Query
from causaldb.storage import Database

DATA = Path(__file__).parent / "data"

EX21_R = [("a1", "a5"), ("a2", "a1"), ("a3", "a3"), ("a4", "a3"), ("a4", "a2")]
EX21_S = [("a1",), ("a2",), ("a3",), ("a4",), ("a6",)]


def example21(exogenous=()) -> Database:
    return Database.build({"R": EX21_R, "S": EX21_S}, exogenous=exogenous)


def naive_holds(q: Query, db: Database, removed=frozenset(), only=None) -> bool:
    return bool(naive_valuations(q, db, removed, only))


def naive_valuations(q: Query, db: Database, removed=frozenset(), only=None):
    """Nested loops over the atoms; returns the list of tuple-id sequences."""
    out = []

    def rows(rel):
        for r in db.rows(rel):
            if r.id in removed or (only is not None and r.id not in only):
                continue
            yield r

    def go(i, binding, ids):
        if i == len(q.atoms):
            out.append(tuple(ids))
            return
        atom = q.atoms[i]
        for r in rows(atom.relation):
            b = dict(binding)
            ok = len(r.values) == len(atom.terms)
            for term, value in zip(atom.terms, r.values):
                if not ok:
                    break
                if term.is_var:
                    if b.setdefault(term.name, value) != value:
                        ok = False
                elif term.name != value:
                    ok = False
            if ok:
                go(i + 1, b, ids + [r.id])

    go(0, {}, [])
    return out


def brute_causes(q: Query, db: Database) -> set[int]:
    """Actual causes straight from the definition: t is a cause when some
    Γ ⊆ D^n − {t} keeps q true on D − Γ and false on D − Γ − {t}."""
    endo = sorted(db.endogenous)
    out = set()
    for t in endo:
        others = [g for g in endo if g != t]
        found = False
        for k in range(len(others) + 1):
            for gamma in itertools.combinations(others, k):
                g = set(gamma)
                if naive_holds(q, db, g) and not naive_holds(q, db, g | {t}):
                    found = True
                    break
            if found:
                break
        if found:
            out.add(t)
    return out


def brute_rho(q: Query, db: Database, t: int) -> Fraction:
    others = [g for g in sorted(db.endogenous) if g != t]
    for k in range(len(others) + 1):
        for gamma in itertools.combinations(others, k):
            g = set(gamma)
            if naive_holds(q, db, g) and not naive_holds(q, db, g | {t}):
                return Fraction(1, 1 + k)
    return Fraction(0)


def brute_whyno_rho(q: Query, db: Database, t: int) -> tuple[Fraction, int | None]:
    """Full subset enumeration of insertions over all candidates (endogenous)."""
    exo = set(db.exogenous)
    cands = [g for g in sorted(db.endogenous) if g != t]
    for k in range(len(cands) + 1):
        for gamma in itertools.combinations(cands, k):
            g = set(gamma)
            if not naive_holds(q, db, only=exo | g) and naive_holds(q, db, only=exo | g | {t}):
                return Fraction(1, 1 + k), k
    return Fraction(0), None


def random_instance(q: Query, rng: random.Random, max_rows=5, domain="abcd", p_exo=0.3, fixed=None) -> Database:
    """Random rows for every relation of q; ``fixed`` maps relation to
    ``"endo"`` / ``"exo"`` to force a whole relation."""
    fixed = fixed or {}
    arity = {a.relation: a.arity for a in q.atoms}
    rels, exo = {}, {}
    for rel, k in arity.items():
        rows = {tuple(rng.choice(domain) for _ in range(k)) for _ in range(rng.randint(0, max_rows))}
        rels[rel] = sorted(rows)
        mode = fixed.get(rel)
        if mode == "endo":
            exo[rel] = []
        elif mode == "exo":
            exo[rel] = list(rows)
        else:
            exo[rel] = [r for r in rows if rng.random() < p_exo]
    return Database.build(rels, exogenous=exo)


# acceptance outcomes, printed by the terminal summary hook in conftest
ACCEPTANCE: list[str] = []
