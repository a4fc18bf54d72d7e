"""Responsibility complexity of conjunctive queries.

Queries are abstracted to their shape: one atom per relation occurrence,
each with a variable set and an endogenous/exogenous/mixed kind.  A shape is
linear when its atoms can be ordered so that every variable's atoms form a
consecutive run.  Weakening (domination, dissociation) widens the linear
class; rewriting (delete a variable, add a variable, delete an atom) reduces
a non weakly linear query to one of three canonical hard shapes.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .budget import Budget, default_budget
from .errors import ClassifierBug, ResourceLimit, SchemaError
from .query import ENDOGENOUS, EXOGENOUS, Query, has_self_join

PTIME = "ptime"
NP_HARD = "np-hard"
OPEN = "open"

ENDO, EXO, MIXED = "n", "x", "m"


@dataclass(frozen=True)
class ShapeAtom:
    name: str
    vars: frozenset[str]
    kind: str = ENDO

    def __str__(self) -> str:
        mark = {ENDO: "^n", EXO: "^x", MIXED: ""}[self.kind]
        return f"{self.name}{mark}({','.join(sorted(self.vars))})"


@dataclass(frozen=True)
class Shape:
    atoms: tuple[ShapeAtom, ...]

    @classmethod
    def parse(cls, text: str) -> "Shape":
        """``"R^n(x,y), S^x(y,z), A^n"`` (no parentheses means no variables)."""
        atoms = []
        for part in _split_atoms(text):
            name, _, rest = part.partition("(")
            kind = ENDO
            if name.endswith("^x"):
                kind, name = EXO, name[:-2]
            elif name.endswith("^n"):
                name = name[:-2]
            vs = frozenset(v.strip() for v in rest.rstrip(")").split(",") if v.strip())
            atoms.append(ShapeAtom(name.strip(), vs, kind))
        return cls(tuple(atoms))

    @property
    def variables(self) -> list[str]:
        return sorted(set().union(*(a.vars for a in self.atoms)))

    def index(self, name: str) -> int:
        for i, a in enumerate(self.atoms):
            if a.name == name:
                return i
        raise KeyError(name)

    def sg(self, var: str) -> frozenset[int]:
        return frozenset(i for i, a in enumerate(self.atoms) if var in a.vars)

    def key(self) -> tuple:
        """Identity up to renaming of variables (atom names are kept)."""
        atoms = tuple(sorted((a.name, a.kind) for a in self.atoms))
        edges = tuple(sorted(tuple(sorted(self.atoms[i].name for i in self.sg(v))) for v in self.variables))
        return atoms, edges

    def __str__(self) -> str:
        return ", ".join(str(a) for a in self.atoms)


def _split_atoms(text: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return parts


def shape_of(q: Query, pattern: Mapping[str, str] | None = None) -> Shape:
    """Abstract ``q``; constants vanish, repeated variables collapse.

    The kind of an atom comes from its marker, then the query directive,
    then ``pattern`` (``endogenous``/``exogenous``/``mixed``); anything still
    unspecified is endogenous.
    """
    kinds = {ENDOGENOUS: ENDO, EXOGENOUS: EXO, "mixed": MIXED}
    atoms = []
    for i, a in enumerate(q.atoms):
        ann = q.atom_annotation(i) or (pattern or {}).get(a.relation) or ENDOGENOUS
        atoms.append(ShapeAtom(a.relation, frozenset(a.variables), kinds[ann]))
    return Shape(tuple(atoms))


def _as_shape(q) -> Shape:
    if isinstance(q, Shape):
        return q
    if isinstance(q, str):
        return Shape.parse(q)
    return shape_of(q)


# -- dual hypergraph and linearity -----------------------------------------


@dataclass(frozen=True)
class DualHypergraph:
    vertices: tuple[int, ...]
    hyperedges: Mapping[str, frozenset[int]]


def dual_hypergraph(q) -> DualHypergraph:
    s = _as_shape(q)
    return DualHypergraph(tuple(range(len(s.atoms))), {v: s.sg(v) for v in s.variables})


def linear_order(shape: Shape) -> list[int] | None:
    """An atom order in which every hyperedge is consecutive, or None.

    Depth-first placement: a partial order is viable only if every edge that
    has started but not finished contains the last placed atom.  Failures
    are memoized on (placed set, last atom).
    """
    m = len(shape.atoms)
    edges = list({shape.sg(v) for v in shape.variables if len(shape.sg(v)) > 1})
    failed: set[tuple[frozenset[int], int]] = set()

    def viable(placed: frozenset[int], last: int) -> bool:
        for e in edges:
            if e & placed and not e <= placed and last not in e:
                return False
        return True

    def search(order: list[int], placed: frozenset[int]) -> list[int] | None:
        if len(order) == m:
            return order
        last = order[-1] if order else -1
        if (placed, last) in failed:
            return None
        for a in range(m):
            if a in placed:
                continue
            nxt = placed | {a}
            if not viable(nxt, a):
                continue
            found = search(order + [a], nxt)
            if found is not None:
                return found
        failed.add((placed, last))
        return None

    return search([], frozenset())


def is_linear(q) -> list[str] | None:
    """Atom names in a linear order, or None."""
    s = _as_shape(q)
    order = linear_order(s)
    return None if order is None else [s.atoms[i].name for i in order]


# -- weakening ---------------------------------------------------------------


@dataclass(frozen=True)
class WeakeningStep:
    rule: str  # "domination" or "dissociation"
    atom: str
    var: str | None = None

    def to_json(self) -> dict:
        d = {"rule": self.rule, "atom": self.atom}
        if self.var is not None:
            d["var"] = self.var
        return d


@dataclass(frozen=True)
class Weakening:
    steps: tuple[WeakeningStep, ...]
    result: Shape
    order: tuple[str, ...]


def apply_weakening(shape: Shape, step: WeakeningStep, keep: Iterable[str] = ()) -> Shape:
    """Apply one step after checking its side condition; raises ValueError."""
    i = shape.index(step.atom)
    g = shape.atoms[i]
    atoms = list(shape.atoms)
    if step.rule == "domination":
        if g.kind == EXO or g.name in set(keep):
            raise ValueError(f"{g.name} cannot be dominated")
        if not any(j != i and o.kind == ENDO and o.vars <= g.vars for j, o in enumerate(shape.atoms)):
            raise ValueError(f"no endogenous atom dominates {g.name}")
        atoms[i] = replace(g, kind=EXO)
    elif step.rule == "dissociation":
        if g.kind != EXO:
            raise ValueError(f"{g.name} is not exogenous")
        if step.var in g.vars or not any(
            j != i and o.vars & g.vars and step.var in o.vars for j, o in enumerate(shape.atoms)
        ):
            raise ValueError(f"{step.var} does not occur in a neighbor of {g.name}")
        atoms[i] = replace(g, vars=g.vars | {step.var})
    else:
        raise ValueError(f"unknown weakening rule {step.rule}")
    return Shape(tuple(atoms))


def dominate_all(shape: Shape, keep: Iterable[str] = ()) -> tuple[Shape, list[WeakeningStep]]:
    """Make every dominated atom exogenous.  Larger atoms go first so that of
    several atoms with equal variable sets one stays endogenous."""
    keep = set(keep)
    steps = []
    order = sorted(range(len(shape.atoms)), key=lambda i: (-len(shape.atoms[i].vars), shape.atoms[i].name))
    for i in order:
        g = shape.atoms[i]
        if g.kind == EXO or g.name in keep:
            continue
        if any(j != i and o.kind == ENDO and o.vars <= g.vars for j, o in enumerate(shape.atoms)):
            step = WeakeningStep("domination", g.name)
            shape = apply_weakening(shape, step, keep)
            steps.append(step)
    return shape, steps


def weakening_closure(q, keep: Iterable[str] = (), budget: Budget | None = None) -> Weakening | None:
    """Find a weakening of ``q`` that is linear, or None.

    Domination only ever adds options, so it is applied to fixpoint first;
    dissociations are then searched breadth-first.  Atoms named in ``keep``
    are never dominated (the probed tuple has to stay endogenous).
    """
    budget = budget or default_budget()
    shape, steps = dominate_all(_as_shape(q), keep)
    start = shape
    seen = {start.atoms}
    queue = deque([(start, tuple(steps))])
    while queue:
        cur, path = queue.popleft()
        order = linear_order(cur)
        if order is not None:
            return Weakening(path, cur, tuple(cur.atoms[i].name for i in order))
        for i, g in enumerate(cur.atoms):
            if g.kind != EXO:
                continue
            near = set()
            for j, o in enumerate(cur.atoms):
                if j != i and o.vars & g.vars:
                    near |= o.vars
            for v in sorted(near - g.vars):
                nxt = list(cur.atoms)
                nxt[i] = replace(g, vars=g.vars | {v})
                nxt_t = tuple(nxt)
                if nxt_t in seen:
                    continue
                seen.add(nxt_t)
                if len(seen) > budget.weakening_states:
                    raise ResourceLimit(f"weakening search exceeded {budget.weakening_states} states")
                queue.append((Shape(nxt_t), path + (WeakeningStep("dissociation", g.name, v),)))
    return None


def is_weakly_linear(q, budget: Budget | None = None) -> bool:
    return weakening_closure(q, budget=budget) is not None


# -- rewriting ---------------------------------------------------------------


@dataclass(frozen=True)
class RewriteStep:
    rule: str  # "delete-atom", "delete-var", "add-var"
    atom: str | None = None
    var: str | None = None
    along: str | None = None  # add-var: ``var`` joins every atom containing ``along``
    before: Shape | None = field(default=None, compare=False)
    after: Shape | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        d = {"rule": self.rule}
        if self.atom is not None:
            d["atom"] = self.atom
        if self.var is not None:
            d["var"] = self.var
        if self.along is not None:
            d["along"] = self.along
        if self.after is not None:
            d["query"] = str(self.after)
        return d


def apply_rewrite(shape: Shape, step: RewriteStep) -> Shape:
    """Apply one rewriting after checking its side condition; raises ValueError."""
    if step.rule == "delete-atom":
        i = shape.index(step.atom)
        g = shape.atoms[i]
        if g.kind != EXO and not any(j != i and o.vars <= g.vars for j, o in enumerate(shape.atoms)):
            raise ValueError(f"{g.name} is endogenous and not dominated")
        return Shape(shape.atoms[:i] + shape.atoms[i + 1 :])
    if step.rule == "delete-var":
        if step.var not in shape.variables:
            raise ValueError(f"no variable {step.var}")
        return Shape(tuple(replace(a, vars=a.vars - {step.var}) for a in shape.atoms))
    if step.rule == "add-var":
        x, y = step.along, step.var
        if x == y or not any({x, y} <= a.vars for a in shape.atoms):
            raise ValueError(f"no atom contains both {x} and {y}")
        if all(y in a.vars for a in shape.atoms if x in a.vars):
            raise ValueError(f"adding {y} along {x} changes nothing")
        return Shape(tuple(replace(a, vars=a.vars | {y}) if x in a.vars else a for a in shape.atoms))
    raise ValueError(f"unknown rewrite rule {step.rule}")


def rewrite_steps(q) -> list[RewriteStep]:
    """Every legal single rewriting, deduplicated up to variable renaming."""
    shape = _as_shape(q)
    cands = [RewriteStep("delete-atom", atom=a.name) for a in shape.atoms]
    cands += [RewriteStep("delete-var", var=v) for v in shape.variables]
    cands += [RewriteStep("add-var", var=y, along=x) for x in shape.variables for y in shape.variables if x != y]
    out, seen = [], set()
    for step in cands:
        try:
            after = apply_rewrite(shape, step)
        except ValueError:
            continue
        if not after.atoms:
            continue
        k = after.key()
        if k in seen:
            continue
        seen.add(k)
        out.append(replace(step, before=shape, after=after))
    return out


# -- canonical hard shapes ---------------------------------------------------

# None means either kind matches
CANONICAL = {
    "h1": [("x", ENDO), ("y", ENDO), ("z", ENDO), ("xyz", None)],
    "h2": [("xy", ENDO), ("yz", ENDO), ("xz", ENDO)],
    "h3": [("x", ENDO), ("y", ENDO), ("z", ENDO), ("xy", None), ("yz", None), ("xz", None)],
}
CANONICAL_TEXT = {
    "h1": "A^n(x), B^n(y), C^n(z), W(x,y,z)",
    "h2": "R^n(x,y), S^n(y,z), T^n(z,x)",
    "h3": "A^n(x), B^n(y), C^n(z), R(x,y), S(y,z), T(z,x)",
}


def is_isomorphic_canonical(q) -> str | None:
    shape = _as_shape(q)
    vs = shape.variables
    if len(vs) != 3:
        return None
    for name, template in CANONICAL.items():
        if len(template) != len(shape.atoms):
            continue
        for perm in itertools.permutations("xyz"):
            ren = dict(zip(vs, perm))
            want = {frozenset(t[0]): t[1] for t in template}
            ok = len(want) == len(shape.atoms)
            used = set()
            for a in shape.atoms:
                key = frozenset(ren[v] for v in a.vars)
                if key not in want or key in used:
                    ok = False
                    break
                used.add(key)
                kind = want[key]
                if kind is not None and a.kind != kind:
                    ok = False
                    break
            if ok:
                return name
    return None


# -- verdicts ----------------------------------------------------------------


@dataclass
class Verdict:
    kind: str
    weakening: Weakening | None = None
    chain: list[RewriteStep] = field(default_factory=list)
    terminal: str | None = None
    pattern: str | None = None
    notes: list[str] = field(default_factory=list)
    shape: Shape | None = None

    def to_json(self) -> dict:
        d: dict = {"verdict": self.kind}
        if self.shape is not None:
            d["query"] = str(self.shape)
        if self.kind == PTIME and self.weakening is not None:
            d["weakening"] = [s.to_json() for s in self.weakening.steps]
            d["order"] = list(self.weakening.order)
        if self.kind == NP_HARD:
            if self.pattern:
                d["pattern"] = self.pattern
            else:
                d["chain"] = [s.to_json() for s in self.chain]
                d["terminal"] = self.terminal
        if self.notes:
            d["notes"] = list(self.notes)
        return d


def _self_join_hard(q: Query) -> bool:
    """R^n(x), S(x,y), R^n(y) up to renaming and argument order."""
    if len(q.atoms) != 3 or any(not t.is_var for a in q.atoms for t in a.terms):
        return False
    unary = [i for i, a in enumerate(q.atoms) if a.arity == 1]
    binary = [i for i, a in enumerate(q.atoms) if a.arity == 2]
    if len(unary) != 2 or len(binary) != 1:
        return False
    r1, r2 = (q.atoms[i] for i in unary)
    s = q.atoms[binary[0]]
    if r1.relation != r2.relation or s.relation == r1.relation:
        return False
    if any(q.atom_annotation(i) == EXOGENOUS for i in unary):
        return False
    x, y = r1.terms[0].name, r2.terms[0].name
    return x != y and set(s.variables) == {x, y}


def classify(q, pattern: Mapping[str, str] | None = None, budget: Budget | None = None) -> Verdict:
    """PTIME with a weakening witness, NP-hard with a rewrite chain, or Open."""
    budget = budget or default_budget()
    if isinstance(q, Query):
        if not q.is_boolean:
            raise SchemaError(f"{q.name} has head variables; specialize it to an answer first")
        if has_self_join(q):
            shape = shape_of(q, pattern)
            if _self_join_hard(q):
                return Verdict(NP_HARD, pattern="R^n(x), S(x,y), R^n(y)", shape=shape)
            return Verdict(OPEN, notes=["queries with self-joins are outside the dichotomy"], shape=shape)
        shape = shape_of(q, pattern)
    else:
        shape = _as_shape(q)
    notes = []
    if any(a.kind == MIXED for a in shape.atoms):
        notes.append("mixed relations classified as endogenous")
        shape = Shape(tuple(replace(a, kind=ENDO) if a.kind == MIXED else a for a in shape.atoms))

    w = weakening_closure(shape, budget=budget)
    if w is not None:
        return Verdict(PTIME, weakening=w, notes=notes, shape=shape)

    chain: list[RewriteStep] = []
    cur = shape
    visited = {cur.key()}
    while True:
        nxt = None
        for step in rewrite_steps(cur):
            if step.after.key() in visited:
                continue
            if weakening_closure(step.after, budget=budget) is None:
                nxt = step
                break
        if nxt is None:
            break
        chain.append(nxt)
        cur = nxt.after
        visited.add(cur.key())
    terminal = is_isomorphic_canonical(cur)
    if terminal is None:
        raise ClassifierBug(f"rewriting stopped at {cur}, which is not a canonical hard query")
    return Verdict(NP_HARD, chain=chain, terminal=terminal, notes=notes, shape=shape)


def verify_verdict(verdict: Verdict, shape: Shape | None = None) -> bool:
    """Replay a certificate from scratch; raises ValueError on any bad step."""
    shape = shape or verdict.shape
    if verdict.kind == PTIME:
        cur = shape
        for step in verdict.weakening.steps:
            cur = apply_weakening(cur, step)
        order = list(verdict.weakening.order)
        if sorted(order) != sorted(a.name for a in cur.atoms):
            raise ValueError("order does not list every atom")
        pos = {name: i for i, name in enumerate(order)}
        for v in cur.variables:
            idx = sorted(pos[cur.atoms[i].name] for i in cur.sg(v))
            if idx[-1] - idx[0] + 1 != len(idx):
                raise ValueError(f"variable {v} is not consecutive in the order")
        return True
    if verdict.kind == NP_HARD and verdict.pattern is None:
        cur = shape
        for step in verdict.chain:
            cur = apply_rewrite(cur, step)
        if is_isomorphic_canonical(cur) != verdict.terminal:
            raise ValueError(f"chain ends at {cur}, not {verdict.terminal}")
        return True
    return True
