"""Responsibility of causes: flow solver, exact hitting-set solver, brute force."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .budget import Budget, default_budget
from .causality import why_no_causes, why_so_causes, whyno_instance
from .complexity import ENDO, EXO, MIXED, PTIME, Shape, ShapeAtom, classify, weakening_closure
from .errors import DataError, NotApplicable, ResourceLimit
from .hitting_set import min_hitting_set
from .lineage import holds, iter_valuations, lineage, n_lineage, remove_redundant
from .maxflow import FlowGraph
from ._join import _matches
from .query import Query, has_self_join, specialize
from .storage import Database, resolve_partition

FLOW, EXACT, BRUTE, WHYNO = "flow", "exact", "brute", "whyno-enum"


@dataclass(frozen=True)
class ResponsibilityResult:
    """``contingency`` is None when ρ is 0 or when no witness was requested."""

    tuple: int
    ref: str
    rho: Fraction
    contingency: tuple[int, ...] | None
    solver: str

    def to_json(self, db: Database) -> dict:
        return {
            "tuple": self.ref,
            "rho": str(self.rho),
            "rho_float": round(float(self.rho), 4),
            "contingency": None if self.contingency is None else sorted(db.ref(g) for g in self.contingency),
            "solver": self.solver,
        }


def _result(db: Database, t: int, gamma, solver: str) -> ResponsibilityResult:
    if gamma is None:
        return ResponsibilityResult(t, db.ref(t), Fraction(0), None, solver)
    gamma = tuple(sorted(gamma))
    return ResponsibilityResult(t, db.ref(t), Fraction(1, 1 + len(gamma)), gamma, solver)


def _tuple_id(db: Database, t) -> int:
    if isinstance(t, int):
        if t not in db:
            raise DataError(f"no tuple with id {t}")
        return t
    if isinstance(t, str):
        for row in db:
            if row.ref == t:
                return row.id
        raise DataError(f"no tuple {t}")
    rel, values = t
    row = db.find(rel, values)
    if row is None:
        raise DataError(f"no tuple {rel}{tuple(values)}")
    return row.id


def is_contingency(q: Query, db: Database, t: int, gamma) -> bool:
    """Replay check straight from the definition."""
    rest = db.without(gamma)
    return holds(q, rest) and not holds(q, rest.without([t]))


# -- brute force -------------------------------------------------------------


def brute_force_responsibility(q: Query, db: Database, t, budget: Budget | None = None) -> ResponsibilityResult:
    """Smallest Γ with q true on D−Γ and false on D−Γ−{t}, by enumeration.

    Only endogenous tuples that occur in some valuation can matter, so Γ
    ranges over those.
    """
    budget = budget or default_budget()
    db = resolve_partition(q, db)
    t = _tuple_id(db, t)
    if not db.get(t).endo:
        return _result(db, t, None, BRUTE)
    conj = [c for c in {v.conjunct for v in iter_valuations(q, db)}]
    relevant = sorted({g for c in conj for g in c if db.get(g).endo and g != t})
    bit = {g: 1 << i for i, g in enumerate(relevant)}
    tbit = 1 << len(relevant)
    masks = []
    for c in conj:
        m = 0
        for g in c:
            if g == t:
                m |= tbit
            elif g in bit:
                m |= bit[g]
        masks.append(m)
    with_t = [m & ~tbit for m in masks if m & tbit]
    without_t = [m for m in masks if not m & tbit]
    # is there any Γ at all?  take Γ = everything outside one valuation through t
    full = (1 << len(relevant)) - 1
    if not any(all(w & full & ~k for w in without_t) for k in with_t):
        return _result(db, t, None, BRUTE)
    if len(relevant) > budget.brute_max:
        raise ResourceLimit(f"brute force over {len(relevant)} tuples exceeds brute_max={budget.brute_max}")
    for size in range(len(relevant) + 1):
        for combo in itertools.combinations(range(len(relevant)), size):
            g = 0
            for i in combo:
                g |= 1 << i
            if any(not k & g for k in with_t) and all(w & g for w in without_t):
                return _result(db, t, [relevant[i] for i in combo], BRUTE)
    return _result(db, t, None, BRUTE)


# -- exact (minimal lineage + hitting set) ------------------------------------


def exact_responsibility(q: Query, db: Database, t, budget: Budget | None = None) -> ResponsibilityResult:
    """Minimum over minimal conjuncts c containing t of a minimum hitting set
    of the conjuncts without t, using tuples outside c."""
    return ExactSolver(q, db, budget).solve(t)


class ExactSolver:
    """Caches the minimal n-lineage so several tuples can be scored."""

    def __init__(self, q: Query, db: Database, budget: Budget | None = None):
        self.budget = budget or default_budget()
        self.db = resolve_partition(q, db)
        self.minimal = remove_redundant(n_lineage(lineage(q, self.db), self.db)).conjuncts

    def solve(self, t) -> ResponsibilityResult:
        return _exact_on(self.minimal, self.db, _tuple_id(self.db, t), self.budget)


def _exact_on(conjuncts, db: Database, t: int, budget: Budget) -> ResponsibilityResult:
    if frozenset() in conjuncts:
        return _result(db, t, None, EXACT)
    with_t = sorted((c for c in conjuncts if t in c), key=lambda c: (len(c), sorted(c)))
    without_t = [c for c in conjuncts if t not in c]
    best = None
    nodes = budget.exact_nodes
    for c in with_t:
        sets = [c2 - c for c2 in without_t]
        upper = None if best is None else len(best)
        try:
            h = min_hitting_set(sets, upper=upper, nodes=nodes)
        except ResourceLimit as exc:
            raise ResourceLimit(
                f"exact responsibility for {db.ref(t)} exceeded exact_nodes={budget.exact_nodes}",
                best_bound=None if best is None else Fraction(1, 1 + len(best)),
            ) from exc
        if h is not None and (best is None or len(h) < len(best)):
            best = h
            if not best:
                break
    return _result(db, t, best, EXACT)


# -- flow --------------------------------------------------------------------


def instance_shape(q: Query, db: Database) -> Shape:
    """Shape of q with atom kinds read off the tuple flags."""
    atoms = []
    for a in q.atoms:
        flags = {r.endo for r in db.rows(a.relation)}
        kind = MIXED if len(flags) == 2 else (EXO if flags == {False} else ENDO)
        atoms.append(ShapeAtom(a.relation, frozenset(a.variables), kind))
    return Shape(tuple(atoms))


class _Network:
    """Layered flow network for one linear weakening of q over db."""

    def __init__(self, q: Query, db: Database, weak, vals):
        self.q, self.db = q, db
        shape = weak.result
        order = [shape.index(name) for name in weak.order]
        m = len(order)
        ivars = []
        for k in range(m - 1):
            a, b = shape.atoms[order[k]], shape.atoms[order[k + 1]]
            ivars.append(tuple(sorted(a.vars & b.vars)))
        self.finite_total = 0
        self.g = FlowGraph(2)
        self.s, self.t = 0, 1
        nodes: dict = {}

        def node(k: int, binding: dict) -> int:
            if k == 0:
                return self.s
            if k == m:
                return self.t
            key = (k, tuple(binding[v] for v in ivars[k - 1]))
            n = nodes.get(key)
            if n is None:
                n = nodes[key] = self.g.add_node()
            return n

        raw = []  # (u, v, cap or None for infinite, tuple id or None, dissociation key)
        self.tuple_edge: dict[int, int] = {}
        self.diss_edge: dict[tuple, int] = {}
        for k, ai in enumerate(order):
            atom = q.atoms[ai]
            weak_atom = shape.atoms[ai]
            orig_vars = frozenset(atom.variables)
            dominated = weak_atom.kind == EXO and instance_kind(db, atom.relation) != EXO
            if weak_atom.vars != orig_vars:
                wv = sorted(weak_atom.vars)
                seen = set()
                for v in vals:
                    b = v.as_dict()
                    key = (ai, tuple(b[x] for x in wv))
                    if key in seen:
                        continue
                    seen.add(key)
                    raw.append((node(k, b), node(k + 1, b), None, None, key))
                continue
            names = atom.variables
            for row in db.rows(atom.relation):
                bvals = _matches(atom, row.values)
                if bvals is None:
                    continue
                b = dict(zip(names, bvals))
                cap = 1 if row.endo and not dominated else None
                raw.append((node(k, b), node(k + 1, b), cap, row.id, None))
                if cap is not None:
                    self.finite_total += 1
        self.inf = self.finite_total + 1
        self.edge_tuple: dict[int, int] = {}
        for u, v, cap, tid, key in raw:
            e = self.g.add_edge(u, v, self.inf if cap is None else cap)
            if tid is not None:
                self.tuple_edge[tid] = e
                self.edge_tuple[e] = tid
            else:
                self.diss_edge[key] = e
        self.order = order
        self.shape = shape
        self.comp_vals = None
        self._components()

        # Dominated rows ride at infinity because a tuple of a dominating atom
        # can be cut in their place.  That stand-in is unavailable when it lies
        # on the valuation kept alive through t, so solve() looks these rows up
        # by their values on the dominators' variables.
        self.dominated = []  # (atom index, dissociated, key variables, {key: row ids})
        for ai, atom in enumerate(q.atoms):
            if shape.atoms[ai].kind != EXO or instance_kind(db, atom.relation) == EXO:
                continue
            own = frozenset(atom.variables)
            doms = [
                j for j, o in enumerate(q.atoms)
                if j != ai and shape.atoms[j].kind == ENDO and instance_kind(db, o.relation) == ENDO
                and frozenset(o.variables) <= own
            ]
            kv = tuple(sorted({v for j in doms for v in q.atoms[j].variables}))
            index: dict[tuple, list[int]] = {}
            for row in db.rows(atom.relation):
                bvals = _matches(atom, row.values) if row.endo else None
                if bvals is None:
                    continue
                b = dict(zip(atom.variables, bvals))
                index.setdefault(tuple(b[v] for v in kv), []).append(row.id)
            self.dominated.append((ai, shape.atoms[ai].vars != own, kv, index))

    def _components(self):
        parent = list(range(self.g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ends = (self.s, self.t)
        for e in range(0, len(self.g.to), 2):
            u, v = self.g.tail(e), self.g.to[e]
            if u not in ends and v not in ends:
                parent[find(u)] = find(v)
        self.comp_of_edge: dict[int, object] = {}
        self.comp_edges: dict[object, list[int]] = {}
        for e in range(0, len(self.g.to), 2):
            u, v = self.g.tail(e), self.g.to[e]
            inner = u if u not in ends else (v if v not in ends else None)
            cid = ("edge", e) if inner is None else find(inner)
            self.comp_of_edge[e] = cid
            self.comp_edges.setdefault(cid, []).append(e)

    def path_edges(self, valuation) -> list[int]:
        b = valuation.as_dict()
        out = []
        for ai, tid in zip(range(len(self.q.atoms)), valuation.tuples):
            weak_atom = self.shape.atoms[ai]
            if weak_atom.vars != frozenset(self.q.atoms[ai].variables):
                out.append(self.diss_edge[(ai, tuple(b[x] for x in sorted(weak_atom.vars)))])
            else:
                out.append(self.tuple_edge[tid])
        return out

    def subgraph(self, cid):
        """Standalone copy of one component; returns graph and edge map."""
        g = FlowGraph(2)
        local: dict[int, int] = {self.s: 0, self.t: 1}
        emap: dict[int, int] = {}
        for e in self.comp_edges[cid]:
            u, v = self.g.tail(e), self.g.to[e]
            for x in (u, v):
                if x not in local:
                    local[x] = g.add_node()
            emap[e] = g.add_edge(local[u], local[v], self.g.orig[e])
        return g, emap


def instance_kind(db: Database, relation: str) -> str:
    flags = {r.endo for r in db.rows(relation)}
    return MIXED if len(flags) == 2 else (EXO if flags == {False} else ENDO)


class FlowSolver:
    """Reusable flow-based responsibility for one (query, instance) pair.

    The network splits into components joined only at source and target;
    max-flow is additive over them, so probing a tuple only re-solves the
    component that holds it.
    """

    def __init__(self, q: Query, db: Database, budget: Budget | None = None):
        if not q.is_boolean:
            raise NotApplicable(f"{q.name} has head variables; specialize it to an answer first")
        if has_self_join(q):
            raise NotApplicable("the flow solver needs a query without self-joins")
        self.budget = budget or default_budget()
        self.q = q
        self.db = resolve_partition(q, db)
        self.shape = instance_shape(q, self.db)
        self._vals = None
        self._nets: dict[str, _Network] = {}
        self._base: dict = {}

    @property
    def valuations(self):
        if self._vals is None:
            self._vals = list(iter_valuations(self.q, self.db))
            self._through: dict[int, list[int]] = {}
            for i, v in enumerate(self._vals):
                for tid in set(v.tuples):
                    self._through.setdefault(tid, []).append(i)
        return self._vals

    def network(self, relation: str) -> _Network:
        net = self._nets.get(relation)
        if net is None:
            weak = weakening_closure(self.shape, keep={relation}, budget=self.budget)
            if weak is None:
                raise NotApplicable(f"no linear weakening keeps {relation} endogenous")
            net = self._nets[relation] = _Network(self.q, self.db, weak, self.valuations)
            self._base[relation] = None
        return net

    def _component_bases(self, relation: str):
        """Max-flow value and min cut of every component at full capacity,
        plus their total and the number of components with infinite flow."""
        if self._base.get(relation) is None:
            net = self._nets[relation]
            bases = {}
            total, infinite = 0, 0
            for cid in net.comp_edges:
                g, emap, inf = self._local(net, cid)
                f = g.max_flow(0, 1)
                if f >= inf:
                    bases[cid] = (None, None)
                    infinite += 1
                else:
                    back = {le: e for e, le in emap.items()}
                    bases[cid] = (f, [back[le] for le in g.min_cut(0)])
                    total += f
            self._base[relation] = (bases, total, infinite)
        return self._base[relation]

    @staticmethod
    def _local(net: _Network, cid, slack: int = 0):
        g, emap = net.subgraph(cid)
        inf = sum(g.orig[le] for le in emap.values() if g.orig[le] < net.inf) + slack + 1
        for le in emap.values():
            if g.orig[le] >= net.inf:
                g.set_capacity(le, inf)
        return g, emap, inf

    def _reopened(self, net: _Network, i: int, t: int) -> set[int] | None:
        """Dominated rows that must stay cuttable while valuation ``i`` is
        kept: every dominating tuple above them lies on that valuation.
        None when such a row belongs to a dissociated atom."""
        v = self.valuations[i]
        b = v.as_dict()
        theta = set(v.tuples)
        out = set()
        for _, dissociated, kv, index in net.dominated:
            for r in index.get(tuple(b[x] for x in kv), ()):
                if r in theta:
                    continue
                if all(t in self.valuations[j].tuples for j in self._through.get(r, ())):
                    continue
                if dissociated:
                    return None
                out.add(r)
        return out

    def solve(self, t, witness: bool = True) -> ResponsibilityResult:
        """Responsibility of ``t``.  With ``witness=False`` only ρ is returned;
        the contingency can run to thousands of tuples on large inputs.

        Raises NotApplicable when a dominated row that has to stay cuttable
        was dissociated away; the exact solver handles those tuples.
        """
        db = self.db
        t = _tuple_id(db, t)
        row = db.get(t)
        if not row.endo or row.relation not in self.q.relations:
            return _result(db, t, None, FLOW)
        net = self.network(row.relation)
        vals = self.valuations
        paths = self._through.get(t, [])
        e_t = net.tuple_edge.get(t)
        if not paths or e_t is None:
            return _result(db, t, None, FLOW)
        cid = net.comp_of_edge[e_t]
        bases, total, infinite = self._component_bases(row.relation)
        own_f, _ = bases[cid]
        if infinite - (own_f is None) > 0:
            return _result(db, t, None, FLOW)
        other = total - (own_f or 0)

        g, emap, inf = self._local(net, cid)
        g.set_capacity(emap[e_t], 0)
        floor = g.max_flow(0, 1)
        if floor >= inf:
            return _result(db, t, None, FLOW)
        plans, seen = [], set()
        for i in paths:
            reopened = self._reopened(net, i, t) if net.dominated else set()
            if reopened is None:
                raise NotApplicable(f"domination does not hold for {db.ref(t)}: a dominated row was dissociated")
            edges = frozenset(emap[e] for e in net.path_edges(vals[i])) - {emap[e_t]}
            key = (edges, frozenset(emap[net.tuple_edge[r]] for r in reopened))
            if key not in seen:
                seen.add(key)
                plans.append(key)
        # floor bounds every κ only while no dominated row is reopened
        tight = not any(opened for _, opened in plans)
        best = None
        for edges, opened in plans:
            if opened:
                h, _, h_inf = self._local(net, cid, len(opened))
                h.set_capacity(emap[e_t], 0)
                for le in opened:
                    h.set_capacity(le, 1)
                base = 0
            else:
                h, h_inf, base = g.copy(), inf, floor
            for le in edges:
                if h.orig[le] < h_inf:
                    h.set_capacity(le, h_inf)
            kappa = base + h.max_flow(0, 1, limit=h_inf - base)
            if kappa >= h_inf:
                continue
            if best is None or kappa < best[0]:
                best = (kappa, h)
                if tight and kappa == floor:
                    break
        if best is None:
            return _result(db, t, None, FLOW)
        back = {le: e for e, le in emap.items()}
        local = {net.edge_tuple[back[le]] for le in best[1].min_cut(0) if back[le] in net.edge_tuple} - {t}
        if len(local) != best[0] or not self._replay_local(cid, net, t, local):
            raise AssertionError(f"flow contingency for {db.ref(t)} failed replay")
        if not witness:
            size = best[0] + other
            return ResponsibilityResult(t, db.ref(t), Fraction(1, 1 + size), None, FLOW)
        gamma = set(local)
        for c, (f, cut) in bases.items():
            if c != cid:
                gamma.update(net.edge_tuple[e] for e in cut if e in net.edge_tuple)
        if len(gamma) != best[0] + other:
            raise AssertionError("min cut does not match the flow value")
        return _result(db, t, gamma, FLOW)

    def _replay_local(self, cid, net: _Network, t: int, gamma: set[int]) -> bool:
        """Replay restricted to the probed component.  Other components are
        cut by their own base min cuts, which max-flow/min-cut guarantees."""
        if net.comp_vals is None:
            net.comp_vals = {}
            for i, v in enumerate(self.valuations):
                net.comp_vals.setdefault(net.comp_of_edge[net.path_edges(v)[0]], []).append(i)
        alive_with_t = False
        for i in net.comp_vals.get(cid, ()):
            ids = set(self.valuations[i].tuples)
            if ids & gamma:
                continue
            if t in ids:
                alive_with_t = True
            else:
                return False
        return alive_with_t


def responsibility_flow(q: Query, db: Database, t, budget: Budget | None = None, verify: bool = True):
    """Responsibility through max-flow on a linear weakening of q."""
    solver = FlowSolver(q, db, budget)
    res = solver.solve(t)
    if verify and res.contingency is not None and not is_contingency(q, solver.db, res.tuple, res.contingency):
        raise AssertionError(f"flow contingency for {res.ref} failed replay")
    return res


# -- Why-No ------------------------------------------------------------------


def whyno_responsibility(q: Query, db_exo: Database, candidates: Database, t) -> ResponsibilityResult:
    """Fewest extra insertions Γ with q false on D^x ∪ Γ and true once t is added.

    Any such Γ of minimum size is c − {t} for a minimal conjunct c of the
    n-lineage that contains t, so the search ranges over those, smallest
    first, and checks the definition on each.
    """
    db = whyno_instance(db_exo, candidates)
    t = _tuple_id(db, t)
    m = len(q.atoms)
    minimal = remove_redundant(n_lineage(lineage(q, db), db))
    if minimal.trivially_true:
        return _result(db, t, None, WHYNO)
    exo = db.exogenous_part()
    options = sorted((c - {t} for c in minimal.conjuncts if t in c), key=lambda c: (len(c), sorted(c)))
    for gamma in options:
        if len(gamma) > m - 1:
            break
        base = db.only(exo.ids | gamma)
        if not holds(q, base) and holds(q, db.only(exo.ids | gamma | {t})):
            return _result(db, t, gamma, WHYNO)
    return _result(db, t, None, WHYNO)


# -- ranking -----------------------------------------------------------------


def choose_solver(q: Query, db: Database, budget: Budget | None = None) -> str:
    if has_self_join(q):
        return EXACT
    db = resolve_partition(q, db)
    pattern = {}
    for rel in q.relations:
        kind = instance_kind(db, rel)
        pattern[rel] = {ENDO: "endogenous", EXO: "exogenous", MIXED: "mixed"}[kind]
    verdict = classify(q, pattern=pattern, budget=budget)
    return FLOW if verdict.kind == PTIME else EXACT


def rank_causes(
    q: Query,
    db: Database,
    answer: Sequence = (),
    mode: str = "why-so",
    candidates: Database | None = None,
    solver: str = "auto",
    budget: Budget | None = None,
    witnesses: bool = True,
) -> tuple[list[ResponsibilityResult], Database]:
    """Causes of the answer scored by responsibility, highest first.

    Returns the results and the instance their tuple ids refer to.
    """
    budget = budget or default_budget()
    bq = specialize(q, answer) if q.head_vars else q
    if mode == "why-no":
        if candidates is None:
            raise DataError("why-no needs a candidate pool")
        causes = why_no_causes(bq, db, candidates)
        inst = whyno_instance(db, candidates)
        results = [whyno_responsibility(bq, db, candidates, c.tuple) for c in causes]
    else:
        causes = why_so_causes(bq, db)
        inst = resolve_partition(bq, db)
        chosen = choose_solver(bq, inst, budget) if solver == "auto" else solver
        results = []
        flow = exact = None
        for c in causes:
            if chosen == FLOW:
                try:
                    flow = flow or FlowSolver(bq, inst, budget)
                    results.append(flow.solve(c.tuple, witness=witnesses))
                    continue
                except NotApplicable:
                    if solver == FLOW:
                        raise
            if chosen == BRUTE:
                results.append(brute_force_responsibility(bq, inst, c.tuple, budget))
            else:
                exact = exact or ExactSolver(bq, inst, budget)
                results.append(exact.solve(c.tuple))
    results.sort(key=lambda r: (-r.rho, r.ref))
    return results, inst
