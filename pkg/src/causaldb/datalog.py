"""Two-stratum Datalog programs that compute the causes of a Boolean query.

Stratum 1 holds the ``I`` rules: each one detects a valuation whose
endogenous tuples form a subset of a given tuple combination.  Stratum 2
holds one ``C_R`` rule per (body, endogenous atom) pair; a body is a
refinement of the query (each atom tagged ``_n`` or ``_x``) or the image of
one under unification of same-relation endogenous atoms.  A ``C_R`` rule
keeps a valuation only when no other valuation has a strictly smaller set
of endogenous tuples, which is the non-redundancy test on the n-lineage.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ._join import join
from .budget import Budget, default_budget
from .errors import ResourceLimit, SchemaError
from .query import ENDOGENOUS, EXOGENOUS, Atom, Query, Term, Var
from .storage import Database, resolve_partition

MIXED = "mixed"
_MODE = {ENDOGENOUS: ("n",), EXOGENOUS: ("x",), MIXED: ("n", "x")}


@dataclass(frozen=True)
class Literal:
    relation: str
    terms: tuple[Term, ...]
    mode: str | None = None  # "n"/"x" for stored relations, None for derived ones
    negated: bool = False

    @property
    def key(self) -> str:
        return f"{self.relation}/{self.mode}" if self.mode else self.relation

    def __str__(self) -> str:
        name = f"{self.relation}_{self.mode}" if self.mode else self.relation
        text = f"{name}({', '.join(str(t) for t in self.terms)})"
        return f"not {text}" if self.negated else text


@dataclass(frozen=True)
class Rule:
    head: Literal
    body: tuple[Literal, ...]
    stratum: int

    def __str__(self) -> str:
        return f"{self.head} :- {', '.join(str(b) for b in self.body)}."


@dataclass
class DatalogProgram:
    query: Query
    pattern: dict[str, str]
    rules: list[Rule] = field(default_factory=list)
    bodies: list[tuple[Atom, ...]] = field(default_factory=list)

    @property
    def strata(self) -> tuple[list[Rule], list[Rule]]:
        return ([r for r in self.rules if r.stratum == 1], [r for r in self.rules if r.stratum == 2])

    @property
    def cause_relations(self) -> list[str]:
        return [rel for rel in self.query.relations if self.pattern[rel] != EXOGENOUS]

    def __str__(self) -> str:
        lines = []
        for i, stratum in enumerate(self.strata, 1):
            lines.append(f"% stratum {i}")
            lines.extend(str(r) for r in stratum)
        return "\n".join(lines) + "\n"


# -- unification -------------------------------------------------------------


class _Unifier:
    def __init__(self):
        self.parent: dict[Term, Term] = {}

    def find(self, t: Term) -> Term:
        root = t
        while root in self.parent:
            root = self.parent[root]
        while t != root:
            nxt = self.parent[t]
            self.parent[t] = root
            t = nxt
        return root

    def union(self, a: Term, b: Term) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return True
        if not ra.is_var and not rb.is_var:
            return False
        # constants win; otherwise the smaller variable name represents the class
        if not ra.is_var or (rb.is_var and ra.name < rb.name):
            ra, rb = rb, ra
        self.parent[ra] = rb
        return True

    def apply(self, atom: Atom) -> Atom:
        return Atom(atom.relation, tuple(self.find(t) for t in atom.terms), atom.annotation)


def _unify_groups(atoms: Sequence[Atom], groups: Iterable[Sequence[int]]) -> list[Atom] | None:
    u = _Unifier()
    for g in groups:
        first = atoms[g[0]]
        for j in g[1:]:
            for a, b in zip(first.terms, atoms[j].terms):
                if not u.union(a, b):
                    return None
    return [u.apply(a) for a in atoms]


def _set_partitions(items: list):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1 :]
        yield [[head]] + part


def _dedupe(atoms: Iterable[Atom]) -> tuple[Atom, ...]:
    return tuple(dict.fromkeys(atoms))


def _canonical(atoms: Sequence[Atom], head: Sequence[Term] = ()) -> tuple:
    names: dict[str, str] = {}
    for t in itertools.chain(head, (t for a in atoms for t in a.terms)):
        if t.is_var and t.name not in names:
            names[t.name] = f"v{len(names)}"

    def ren(t: Term) -> Term:
        return Var(names[t.name]) if t.is_var else t

    return (tuple(ren(t) for t in head), tuple(Atom(a.relation, tuple(map(ren, a.terms)), a.annotation) for a in atoms))


# -- generation --------------------------------------------------------------


def relation_pattern(q: Query, db: Database) -> dict[str, str]:
    """Endogenous, exogenous or mixed per relation, as seen in ``db``."""
    db = resolve_partition(q, db)
    out = {}
    for rel in q.relations:
        flags = {r.endo for r in db.rows(rel)}
        out[rel] = MIXED if len(flags) == 2 else (EXOGENOUS if flags == {False} else ENDOGENOUS)
    return out


def _pattern_for(q: Query, pattern: Mapping[str, str] | None) -> dict[str, str]:
    out = {}
    for rel in q.relations:
        ann = None
        markers = {a.annotation for a in q.atoms if a.relation == rel and a.annotation}
        if len(markers) > 1:
            raise SchemaError(f"relation {rel} is marked both endogenous and exogenous")
        ann = next(iter(markers), None) or q.directive_for(rel)
        if ann is None:
            ann = (pattern or {}).get(rel, MIXED)
        if ann not in _MODE:
            raise SchemaError(f"unknown pattern {ann!r} for {rel}")
        out[rel] = ann
    return out


def _refinements(q: Query, pattern: Mapping[str, str]) -> list[tuple[Atom, ...]]:
    choices = [[Atom(a.relation, a.terms, m) for m in _MODE[pattern[a.relation]]] for a in q.atoms]
    return [_dedupe(r) for r in itertools.product(*choices)]


def _endo(atoms: Sequence[Atom]) -> list[int]:
    return [i for i, a in enumerate(atoms) if a.annotation == "n"]


def _images(refinement: Sequence[Atom]) -> list[tuple[Atom, ...]]:
    """The refinement unified along every partition of its endogenous atoms
    into same-relation blocks (the trivial partition gives the refinement)."""
    by_rel: dict[str, list[int]] = {}
    for i in _endo(refinement):
        by_rel.setdefault(refinement[i].relation, []).append(i)
    out = []
    for combo in itertools.product(*(list(_set_partitions(ix)) for ix in by_rel.values())):
        groups = [g for part in combo for g in part if len(g) > 1]
        unified = _unify_groups(refinement, groups)
        if unified is not None:
            out.append(_dedupe(unified))
    return out


def _literal(atom: Atom, negated: bool = False) -> Literal:
    return Literal(atom.relation, atom.terms, atom.annotation, negated)


def generate_program(q: Query, pattern: Mapping[str, str] | None = None, budget: Budget | None = None) -> DatalogProgram:
    """Build the causality program for Boolean ``q``.

    ``pattern`` maps relations to ``endogenous``, ``exogenous`` or ``mixed``;
    atom markers and directives in ``q`` take precedence, and relations not
    mentioned anywhere are treated as mixed.
    """
    if not q.is_boolean:
        raise SchemaError(f"{q.name} has head variables; specialize it to an answer first")
    budget = budget or default_budget()
    pattern = _pattern_for(q, pattern)
    refinements = _refinements(q, pattern)

    bodies: dict[tuple, tuple[Atom, ...]] = {}
    for r in refinements:
        for img in _images(r):
            bodies.setdefault(_canonical(img), img)

    program = DatalogProgram(q, pattern)
    i_rules: dict[tuple, str] = {}
    c_rules: dict[str, Rule] = {}

    def i_literal(r2: tuple[Atom, ...], f: dict[int, int], s: tuple[Atom, ...]) -> Literal | None:
        targets = sorted(set(f.values()))
        groups = [[b for b in f if f[b] == tgt] for tgt in targets]
        unified = _unify_groups(r2, groups)
        if unified is None:
            return None
        head_terms = tuple(t for g in groups for t in unified[g[0]].terms)
        body = _dedupe(unified)
        key = _canonical(body, head_terms)
        name = i_rules.get(key)
        if name is None:
            name = f"I{len(i_rules) + 1}"
            i_rules[key] = name
            head = Literal(name, key[0])
            program.rules.append(Rule(head, tuple(_literal(a) for a in key[1]), 1))
            _check(program, budget)
        args = tuple(t for tgt in targets for t in s[tgt].terms)
        return Literal(name, args, None, True)

    for s in bodies.values():
        program.bodies.append(s)
        n_s = _endo(s)
        negs: dict[Literal, None] = {}
        for r2 in refinements:
            n_r = _endo(r2)
            options = [[j for j in n_s if s[j].relation == r2[b].relation] for b in n_r]
            for image in itertools.product(*options):
                if len(set(image)) >= len(n_s):
                    continue
                lit = i_literal(r2, dict(zip(n_r, image)), s)
                if lit is not None:
                    negs.setdefault(lit, None)
        body = tuple(_literal(a) for a in s) + tuple(negs)
        for j in n_s:
            rule = Rule(Literal(f"C_{s[j].relation}", s[j].terms), body, 2)
            key = str(Rule(rule.head, tuple(sorted(body, key=str)), 2))
            if key not in c_rules:
                c_rules[key] = rule
                program.rules.append(rule)
                _check(program, budget)
    return program


def _check(program: DatalogProgram, budget: Budget) -> None:
    if len(program.rules) > budget.datalog_rules:
        raise ResourceLimit(f"causality program exceeds {budget.datalog_rules} rules")


# -- evaluation --------------------------------------------------------------


def _fire(rule: Rule, rows_of, derived) -> set[tuple[str, ...]]:
    positive = [Atom(b.key, b.terms) for b in rule.body if not b.negated]
    negative = [b for b in rule.body if b.negated]
    out = set()
    for binding, _ in join(positive, rows_of):
        ok = True
        for lit in negative:
            args = tuple(binding[t.name] if t.is_var else t.name for t in lit.terms)
            if args in derived.get(lit.relation, ()):
                ok = False
                break
        if ok:
            out.add(tuple(binding[t.name] if t.is_var else t.name for t in rule.head.terms))
    return out


def evaluate_program(program: DatalogProgram, db: Database) -> dict[str, frozenset[tuple[str, ...]]]:
    """Run both strata; returns the cause tuples per query relation."""
    db = resolve_partition(program.query, db)
    stored: dict[str, list] = {}
    for rel in program.query.relations:
        if rel not in db.relations:
            raise SchemaError(f"program refers to unknown relation {rel}")
        stored[f"{rel}/n"] = [(r.values, None) for r in db.rows(rel) if r.endo]
        stored[f"{rel}/x"] = [(r.values, None) for r in db.rows(rel) if not r.endo]
    derived: dict[str, set] = {}

    def rows_of(key: str):
        if key in stored:
            return stored[key]
        return [(v, None) for v in derived.get(key, ())]

    for stratum in program.strata:
        for rule in stratum:
            derived.setdefault(rule.head.relation, set()).update(_fire(rule, rows_of, derived))
    return {rel: frozenset(derived.get(f"C_{rel}", ())) for rel in program.cause_relations}
