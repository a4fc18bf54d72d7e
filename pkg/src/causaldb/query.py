"""Conjunctive query AST, parser and pretty-printer.

Grammar (one rule per source, directives and ``%`` comments allowed)::

    @endogenous Movie, Director
    @exogenous Genre
    q(x) :- R^n(x, y), S(y), y = 'a3'.

Bare identifiers are variables.  Constants are quoted strings or numeric
literals; a constant keeps its literal text, so ``'7'`` and ``7`` are equal
while ``007`` and ``7`` are not.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import QuerySyntaxError, SchemaError

ENDOGENOUS = "endogenous"
EXOGENOUS = "exogenous"
_MARKERS = {"n": ENDOGENOUS, "x": EXOGENOUS}
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass(frozen=True, order=True)
class Term:
    kind: str  # "var" or "const"
    name: str

    @property
    def is_var(self) -> bool:
        return self.kind == "var"

    def __str__(self) -> str:
        if self.is_var:
            return self.name
        return format_constant(self.name)


def Var(name: str) -> Term:
    return Term("var", name)


def Const(value) -> Term:
    return Term("const", str(value))


def format_constant(value: str) -> str:
    if _NUMBER.fullmatch(value):
        return value
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple[Term, ...]
    annotation: str | None = None

    @property
    def arity(self) -> int:
        return len(self.terms)

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for t in self.terms:
            if t.is_var:
                seen.setdefault(t.name, None)
        return tuple(seen)

    def substitute(self, mapping: Mapping[str, Term]) -> "Atom":
        terms = tuple(mapping.get(t.name, t) if t.is_var else t for t in self.terms)
        return Atom(self.relation, terms, self.annotation)

    def __str__(self) -> str:
        marker = {ENDOGENOUS: "^n", EXOGENOUS: "^x"}.get(self.annotation, "")
        return f"{self.relation}{marker}({', '.join(str(t) for t in self.terms)})"


@dataclass(frozen=True)
class Query:
    name: str
    head_vars: tuple[str, ...]
    atoms: tuple[Atom, ...]
    directives: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.atoms:
            raise SchemaError("a query needs at least one atom")
        body = set(self.variables)
        for v in self.head_vars:
            if v not in body:
                raise SchemaError(f"head variable {v} does not occur in the body")

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for atom in self.atoms:
            for v in atom.variables:
                seen.setdefault(v, None)
        return tuple(seen)

    @property
    def is_boolean(self) -> bool:
        return not self.head_vars

    @property
    def relations(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(a.relation for a in self.atoms))

    def directive_for(self, relation: str) -> str | None:
        found = None
        for rel, ann in self.directives:
            if rel == relation:
                found = ann
        return found

    def atom_annotation(self, index: int) -> str | None:
        atom = self.atoms[index]
        return atom.annotation or self.directive_for(atom.relation)

    def __str__(self) -> str:
        return format_query(self)


@dataclass(frozen=True)
class RelationSchema:
    name: str
    columns: tuple[str, ...]
    default: str | None = None

    @property
    def arity(self) -> int:
        return len(self.columns)


@dataclass(frozen=True)
class Schema:
    relations: Mapping[str, RelationSchema] = field(default_factory=dict)

    @classmethod
    def of(cls, spec: Mapping[str, Sequence[str] | int]) -> "Schema":
        """Build from ``{"R": ("x", "y"), "S": 1}``; integers mean anonymous columns."""
        rels = {}
        for name, cols in spec.items():
            if isinstance(cols, int):
                cols = tuple(f"c{i}" for i in range(1, cols + 1))
            rels[name] = RelationSchema(name, tuple(cols))
        return cls(rels)

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def __getitem__(self, name: str) -> RelationSchema:
        return self.relations[name]

    def validate(self, query: Query) -> None:
        for atom in query.atoms:
            rel = self.relations.get(atom.relation)
            if rel is None:
                raise SchemaError(f"unknown relation {atom.relation}")
            if rel.arity != atom.arity:
                raise SchemaError(
                    f"arity mismatch for {atom.relation}: query uses {atom.arity}, schema declares {rel.arity}"
                )


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<directive>@[A-Za-z_]+)
  | (?P<implies>:-)
  | (?P<string>'(?:[^'\\\n]|\\.)*'|"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<marker>\^[nx])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.=])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            toks.append(_Tok("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, skip_nl: bool = True) -> _Tok:
        if skip_nl:
            while self.toks[self.i].kind == "nl":
                self.i += 1
        return self.toks[self.i]

    def next(self, skip_nl: bool = True) -> _Tok:
        tok = self.peek(skip_nl)
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, tok: _Tok, expected: str):
        got = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise QuerySyntaxError(f"expected {expected}, got {got}", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind in ("string",):
            self.error(tok, repr(text))
        return tok

    def parse(self) -> Query:
        directives: list[tuple[str, str]] = []
        rule = None
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                break
            if tok.kind == "directive":
                directives.extend(self.directive())
            elif rule is None:
                rule = self.rule()
            else:
                raise QuerySyntaxError("only one rule per query source", tok.line, tok.col)
        if rule is None:
            tok = self.peek()
            raise QuerySyntaxError("no query rule found", tok.line, tok.col)
        name, head, items, head_tok = rule
        return _build(name, head, items, tuple(directives), head_tok)

    def directive(self) -> list[tuple[str, str]]:
        tok = self.next()
        word = tok.text[1:].lower()
        if word in ("endogenous", "endo"):
            ann = ENDOGENOUS
        elif word in ("exogenous", "exo"):
            ann = EXOGENOUS
        else:
            raise QuerySyntaxError(f"unknown directive {tok.text}", tok.line, tok.col)
        rels = []
        while True:
            t = self.next(skip_nl=False)
            if t.kind != "ident":
                self.error(t, "relation name")
            rels.append((t.text, ann))
            t = self.peek(skip_nl=False)
            if t.text == ",":
                self.next(skip_nl=False)
                continue
            if t.kind in ("nl", "eof"):
                break
            self.error(t, "',' or end of line")
        return rels

    def rule(self):
        name_tok = self.next()
        if name_tok.kind != "ident":
            self.error(name_tok, "query name")
        head: list[_Tok] = []
        if self.peek().text == "(":
            self.next()
            if self.peek().text != ")":
                while True:
                    t = self.next()
                    if t.kind != "ident":
                        self.error(t, "head variable")
                    head.append(t)
                    t = self.next()
                    if t.text == ")":
                        break
                    if t.text != ",":
                        self.error(t, "',' or ')'")
            else:
                self.next()
        self.expect(":-")
        items = []
        while True:
            items.append(self.item())
            t = self.next()
            if t.text == ".":
                break
            if t.text != ",":
                self.error(t, "',' or '.'")
        return name_tok.text, head, items, name_tok

    def term(self) -> tuple[Term, _Tok]:
        t = self.next()
        if t.kind == "ident":
            return Var(t.text), t
        if t.kind == "string":
            return Const(_unquote(t.text)), t
        if t.kind == "number":
            return Const(t.text), t
        self.error(t, "term")

    def item(self):
        t = self.peek()
        if t.kind == "ident":
            nxt = self.toks[self.i + 1]
            if nxt.kind == "marker" or nxt.text == "(":
                return ("atom", self.atom())
        left, ltok = self.term()
        eq = self.next()
        if eq.text != "=":
            self.error(eq, "'(' or '='")
        right, _ = self.term()
        return ("eq", (left, right, ltok))

    def atom(self) -> tuple[Atom, _Tok]:
        rel = self.next()
        annotation = None
        if self.peek().kind == "marker":
            annotation = _MARKERS[self.next().text[1]]
        self.expect("(")
        terms: list[Term] = []
        if self.peek().text != ")":
            while True:
                term, _ = self.term()
                terms.append(term)
                t = self.next()
                if t.text == ")":
                    break
                if t.text != ",":
                    self.error(t, "',' or ')'")
        else:
            self.next()
        return Atom(rel.text, tuple(terms), annotation), rel


def _build(name, head_toks, items, directives, head_tok) -> Query:
    head = []
    for t in head_toks:
        if t.text in head:
            raise QuerySyntaxError(f"duplicate head variable {t.text}", t.line, t.col)
        head.append(t.text)
    atoms = [a for kind, a in items if kind == "atom"]
    subst: dict[str, Term] = {}

    def resolve(term: Term) -> Term:
        while term.is_var and term.name in subst:
            term = subst[term.name]
        return term

    for kind, payload in items:
        if kind != "eq":
            continue
        left, right, tok = payload
        left, right = resolve(left), resolve(right)
        if left == right:
            continue
        if not left.is_var and not right.is_var:
            raise QuerySyntaxError(f"contradictory equality {left} = {right}", tok.line, tok.col)
        if not left.is_var:
            left, right = right, left
        if right.is_var and left.name in head and right.name not in head:
            left, right = right, left
        if left.name in head:
            raise QuerySyntaxError(f"equality binds head variable {left.name}", tok.line, tok.col)
        subst[left.name] = right

    out = []
    for atom, _ in atoms:
        terms = tuple(resolve(t) for t in atom.terms)
        out.append(Atom(atom.relation, terms, atom.annotation))
    if not out:
        raise QuerySyntaxError("query body has no atoms", head_tok.line, head_tok.col)
    arities: dict[str, tuple[int, _Tok]] = {}
    for atom, tok in atoms:
        prev = arities.setdefault(atom.relation, (atom.arity, tok))
        if prev[0] != atom.arity:
            raise SchemaError(
                f"relation {atom.relation} used with arities {prev[0]} and {atom.arity} "
                f"(line {tok.line}, column {tok.col})"
            )
    body_vars = {t.name for a in out for t in a.terms if t.is_var}
    for t in head_toks:
        if t.text not in body_vars:
            raise QuerySyntaxError(f"head variable {t.text} does not occur in the body", t.line, t.col)
    return Query(name, tuple(head), tuple(out), directives)


def parse_query(text: str, schema: Schema | None = None) -> Query:
    q = _Parser(text).parse()
    if schema is not None:
        schema.validate(q)
    return q


def format_query(q: Query) -> str:
    lines = []
    for ann in (ENDOGENOUS, EXOGENOUS):
        rels = [r for r, a in q.directives if a == ann]
        if rels:
            lines.append(f"@{ann} {', '.join(rels)}")
    head = f"{q.name}({', '.join(q.head_vars)})" if q.head_vars else q.name
    lines.append(f"{head} :- {', '.join(str(a) for a in q.atoms)}.")
    return "\n".join(lines)


def specialize(q: Query, answer: Sequence) -> Query:
    """Substitute the answer constants for the head variables (Boolean query)."""
    answer = tuple(str(a) for a in answer)
    if len(answer) != len(q.head_vars):
        raise SchemaError(
            f"answer has {len(answer)} values but {q.name} has {len(q.head_vars)} head variables"
        )
    mapping = {v: Const(a) for v, a in zip(q.head_vars, answer)}
    atoms = tuple(a.substitute(mapping) for a in q.atoms)
    return Query(q.name, (), atoms, q.directives)


def has_self_join(q: Query) -> bool:
    return len(set(a.relation for a in q.atoms)) < len(q.atoms)


def occurrence_sets(q: Query) -> dict[str, frozenset[int]]:
    """Map every variable to the indices of the atoms containing it."""
    occ: dict[str, set[int]] = {}
    for i, atom in enumerate(q.atoms):
        for v in atom.variables:
            occ.setdefault(v, set()).add(i)
    return {v: frozenset(s) for v, s in occ.items()}


def make_query(atoms: Iterable[Atom], head: Sequence[str] = (), name: str = "q") -> Query:
    return Query(name, tuple(head), tuple(atoms))
