"""Backtracking hash join shared by lineage and the Datalog evaluator."""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, Sequence

from .query import Atom

Rows = Callable[[str], Iterable[tuple[tuple[str, ...], object]]]


def _matches(atom: Atom, values: tuple[str, ...]) -> tuple[str, ...] | None:
    """Bind the atom's variables against ``values``; None when the pattern fails."""
    if len(values) != len(atom.terms):
        return None
    seen: dict[str, str] = {}
    for term, value in zip(atom.terms, values):
        if term.is_var:
            prev = seen.setdefault(term.name, value)
            if prev != value:
                return None
        elif term.name != value:
            return None
    return tuple(seen[v] for v in atom.variables)


def matching_rows(atom: Atom, rows: Iterable[tuple[tuple[str, ...], object]]):
    out = []
    for values, payload in rows:
        b = _matches(atom, values)
        if b is not None:
            out.append((b, payload))
    return out


def join(
    atoms: Sequence[Atom],
    rows_of: Rows,
    bound: dict[str, str] | None = None,
) -> Iterator[tuple[dict[str, str], tuple]]:
    """Enumerate every homomorphism of ``atoms`` into the data.

    Yields ``(binding, payloads)`` where ``payloads[i]`` is the payload of the
    row matched by ``atoms[i]``.  ``bound`` pre-binds some variables.
    """
    bound = dict(bound or {})
    if not atoms:
        yield dict(bound), ()
        return
    cands = []
    for atom in atoms:
        rows = matching_rows(atom, rows_of(atom.relation))
        if bound:
            pos = [(i, bound[v]) for i, v in enumerate(atom.variables) if v in bound]
            if pos:
                rows = [r for r in rows if all(r[0][i] == val for i, val in pos)]
        if not rows:
            return
        cands.append(rows)

    # greedy order: smallest first, then prefer atoms connected to what is bound
    order: list[int] = []
    known = set(bound)
    remaining = set(range(len(atoms)))
    while remaining:
        def key(i):
            shared = len(set(atoms[i].variables) & known)
            return (0 if shared or not order else 1, -shared, len(cands[i]), i)

        nxt = min(remaining, key=key)
        order.append(nxt)
        remaining.discard(nxt)
        known.update(atoms[nxt].variables)

    plan = []
    known = set(bound)
    for i in order:
        vars_i = atoms[i].variables
        key_pos = tuple(j for j, v in enumerate(vars_i) if v in known)
        index: dict[tuple, list] = {}
        for b, payload in cands[i]:
            index.setdefault(tuple(b[j] for j in key_pos), []).append((b, payload))
        new_pos = tuple(j for j, v in enumerate(vars_i) if v not in known)
        plan.append((i, tuple(vars_i[j] for j in key_pos), new_pos, vars_i, index))
        known.update(vars_i)

    payloads: list = [None] * len(atoms)
    binding = dict(bound)

    def walk(depth: int):
        if depth == len(plan):
            yield dict(binding), tuple(payloads)
            return
        i, key_vars, new_pos, vars_i, index = plan[depth]
        for b, payload in index.get(tuple(binding[v] for v in key_vars), ()):
            for j in new_pos:
                binding[vars_i[j]] = b[j]
            payloads[i] = payload
            yield from walk(depth + 1)
        for j in new_pos:
            binding.pop(vars_i[j], None)

    yield from walk(0)
