import random
from fractions import Fraction

import pytest

from causaldb.budget import Budget
from causaldb.errors import DataError, NotApplicable, ResourceLimit
from causaldb.lineage import holds
from causaldb.query import parse_query, specialize
from causaldb.responsibility import (
    FlowSolver,
    brute_force_responsibility,
    choose_solver,
    exact_responsibility,
    is_contingency,
    rank_causes,
    responsibility_flow,
    whyno_responsibility,
)
from causaldb.storage import Database, load_directory
from helpers import DATA, brute_rho, brute_whyno_rho, example21, random_instance

Q21 = parse_query("q(x) :- R(x, y), S(y).")
SOLVERS = (brute_force_responsibility, exact_responsibility, responsibility_flow)


@pytest.mark.parametrize("solve", SOLVERS)
def test_example21_answer_a4(solve):
    db = example21()
    q = specialize(Q21, ["a4"])
    res = solve(q, db, ("S", ["a3"]))
    assert res.rho == Fraction(1, 2)
    assert is_contingency(q, db, res.tuple, res.contingency)


@pytest.mark.parametrize("solve", SOLVERS)
def test_example21_counterfactual(solve):
    db = example21()
    res = solve(specialize(Q21, ["a2"]), db, "S(a1)")
    assert res.rho == 1 and res.contingency == ()


@pytest.mark.parametrize("solve", SOLVERS)
def test_non_cause_has_zero(solve):
    db = example21()
    q = specialize(Q21, ["a4"])
    res = solve(q, db, "S(a6)")
    assert res.rho == 0 and res.contingency is None


def test_exogenous_tuple_has_zero():
    db = example21({"R": [("a4", "a3")]})
    q = parse_query("q :- R(x, 'a3'), S('a3').")
    assert exact_responsibility(q, db, "R(a4,a3)").rho == 0
    assert exact_responsibility(q, db, "R(a3,a3)").rho == 0
    assert exact_responsibility(q, db, "S(a3)").rho == 1


def test_unknown_tuple():
    with pytest.raises(DataError, match="no tuple"):
        exact_responsibility(specialize(Q21, ["a4"]), example21(), "S(zz)")


def test_result_json():
    db = example21()
    res = exact_responsibility(specialize(Q21, ["a4"]), db, "R(a4,a3)")
    out = res.to_json(db)
    assert out["rho"] == "1/2" and out["rho_float"] == 0.5
    assert len(out["contingency"]) == 1


def test_figure_fixture():
    db = load_directory(DATA / "imdb", DATA / "imdb.ann")
    q = specialize(parse_query((DATA / "queries" / "burton_genres.dl").read_text()), ["Musical"])
    results, inst = rank_causes(q, db)
    rhos = sorted((r.rho for r in results), reverse=True)
    assert rhos == [Fraction(1, 3)] * 4 + [Fraction(1, 4)] * 2 + [Fraction(1, 5)] * 3
    by_ref = {r.ref: r for r in results}
    sweeney = next(r for ref, r in by_ref.items() if "Sweeney" in ref)
    assert {inst.get(g).values[1] for g in sweeney.contingency} == {"David", "Humphrey"}
    manon = next(r for ref, r in by_ref.items() if "Manon" in ref)
    assert len(manon.contingency) == 4


WEAKLY_LINEAR = [
    ("q :- R(x, y), S(y, z).", {}),
    ("q :- A(x), R(x, y), S(y, z).", {}),
    ("q :- R(x, y), S(y, z), T(z, x).", {"R": "endo", "S": "exo", "T": "endo"}),
    ("q :- R(x, y), S(y, z), T(z, u), K(u, x).", {"R": "endo", "S": "exo", "T": "endo", "K": "exo"}),
]


@pytest.mark.parametrize("text,fixed", WEAKLY_LINEAR)
def test_flow_matches_oracle(text, fixed):
    rng = random.Random(text)
    q = parse_query(text)
    seen = 0
    while seen < 15:
        db = random_instance(q, rng, max_rows=4, domain="abc", fixed=fixed)
        if not holds(q, db) or len(db.endogenous) > 12:
            continue
        seen += 1
        flow = FlowSolver(q, db)
        for t in sorted(db.endogenous):
            res = flow.solve(t)
            assert res.rho == brute_rho(q, db, t)
            if res.contingency is not None:
                assert is_contingency(q, db, t, res.contingency)


def test_flow_rejects_self_join_and_falls_back():
    q = parse_query("q :- R(x, y), R(y, z).")
    db = Database.build({"R": [("a", "b"), ("b", "c"), ("b", "b")]})
    with pytest.raises(NotApplicable):
        FlowSolver(q, db)
    assert choose_solver(q, db) == "exact"
    results, _ = rank_causes(q, db)
    assert all(r.solver == "exact" for r in results)
    with pytest.raises(NotApplicable):
        rank_causes(q, db, solver="flow")


def test_hard_query_routes_to_exact():
    q = parse_query("q :- R(x, y), S(y, z), T(z, x).")
    db = Database.build({"R": [("a", "b")], "S": [("b", "c")], "T": [("c", "a")]})
    assert choose_solver(q, db) == "exact"


def test_domination_counterexample():
    """Cutting R(a,b2) is the only single-tuple contingency for S(b,c), yet R is
    dominated by V.  Treating R as uncuttable would give 1/3."""
    q = parse_query("q :- R(x, y), S(y, z), T(z, x), V(x).")
    db = Database.build({
        "V": [("a",)],
        "R": [("a", "b"), ("a", "b2")],
        "S": [("b", "c"), ("b2", "c2"), ("b2", "c3")],
        "T": [("c", "a"), ("c2", "a"), ("c3", "a")],
    })
    t = db.find("S", ["b", "c"]).id
    assert brute_rho(q, db, t) == Fraction(1, 2)
    with pytest.raises(NotApplicable, match="domination"):
        FlowSolver(q, db).solve(t)
    results, inst = rank_causes(q, db)
    s_bc = next(r for r in results if r.ref == "S(b,c)")
    assert s_bc.rho == Fraction(1, 2) and s_bc.solver == "exact"
    assert [inst.ref(g) for g in s_bc.contingency] == ["R(a,b2)"]


def test_dominated_rows_reopened():
    # R is dominated by A but keeps its own edges, so flow stays exact
    q = parse_query("q :- A(x), R(x, y), S(y, z).")
    db = Database.build(
        {"A": [("a",), ("b",), ("d",)], "R": [("b", "b"), ("b", "c"), ("c", "a"), ("d", "a"), ("d", "c")],
         "S": [("a", "d"), ("b", "a"), ("c", "a")]},
        exogenous={"R": [("b", "c")], "S": [("a", "d"), ("b", "a")]},
    )
    res = FlowSolver(q, db).solve(("S", ["c", "a"]))
    assert res.rho == Fraction(1, 3)
    assert is_contingency(q, db, res.tuple, res.contingency)


def test_dominated_triangle_flow_answers_or_declines():
    rng = random.Random(9)
    q = parse_query("q :- R(x, y), S(y, z), T(z, x), V(x).")
    endo = {rel: "endo" for rel in "RSTV"}
    for _ in range(30):
        db = random_instance(q, rng, max_rows=5, domain="abc", fixed=endo)
        if not holds(q, db):
            continue
        flow = FlowSolver(q, db)
        ranked = {r.tuple: r.rho for r in rank_causes(q, db)[0]}
        for t in sorted(db.endogenous):
            truth = exact_responsibility(q, db, t).rho
            assert ranked.get(t, Fraction(0)) == truth
            try:
                assert flow.solve(t).rho == truth
            except NotApplicable:
                pass


def test_brute_budget():
    q = parse_query("q :- R(x, y), S(y).")
    db = Database.build({"R": [(f"a{i}", "b") for i in range(30)], "S": [("b",), ("c",)]})
    db = db.union(Database.build({"R": [("z", "c")]}))
    with pytest.raises(ResourceLimit, match="brute_max"):
        brute_force_responsibility(q, db, "S(b)", Budget(brute_max=5))


def test_exact_budget_reports_bound():
    q = parse_query("q :- R(x, y), S(y, z).")
    rows = [(f"a{i}", f"b{j}") for i in range(6) for j in range(6)]
    db = Database.build({"R": rows, "S": [(f"b{j}", "c") for j in range(6)]})
    with pytest.raises(ResourceLimit):
        exact_responsibility(q, db, "R(a0,b0)", Budget(exact_nodes=1))


def test_rank_order():
    results, _ = rank_causes(Q21, example21(), answer=["a4"])
    assert [r.rho for r in results] == [Fraction(1, 2)] * 4
    assert [r.ref for r in results] == sorted(r.ref for r in results)


def test_whyno_example():
    exo = Database.build({"R": [("a", "b"), ("a", "c")], "S": []})
    cands = Database.build({"S": [("b", "d"), ("c", "d"), ("e", "e")]}, start_id=10)
    q = parse_query("q :- R(x, y), S(y, z).")
    res = whyno_responsibility(q, exo, cands, "S(b,d)")
    assert res.rho == 1 and res.contingency == ()
    assert whyno_responsibility(q, exo, cands, "S(e,e)").rho == 0


def test_whyno_needs_insertions():
    exo = Database.build({"R": [], "S": [("b", "d")], "T": []})
    cands = Database.build({"R": [("a", "b")], "T": [("d",)]}, start_id=10)
    q = parse_query("q :- R(x, y), S(y, z), T(z).")
    res = whyno_responsibility(q, exo, cands, ("T", ["d"]))
    assert res.rho == Fraction(1, 2)
    assert res.ref == "T(d)"
    assert len(res.contingency) == 1


def test_whyno_matches_oracle():
    rng = random.Random(12)
    q = parse_query("q :- R(x, y), S(y, z).")
    checked = 0
    while checked < 30:
        exo = random_instance(q, rng, max_rows=3, domain="abc", p_exo=1.0)
        if holds(q, exo):
            continue
        pool = random_instance(q, rng, max_rows=3, domain="abc", p_exo=0.0)
        fresh = {rel: [r.values for r in pool.rows(rel) if exo.find(rel, r.values) is None] for rel in ("R", "S")}
        cands = Database.build(fresh, start_id=100)
        if len(cands) > 6:
            continue
        checked += 1
        results, inst = rank_causes(q, exo, mode="why-no", candidates=cands)
        for r in results:
            rho, _ = brute_whyno_rho(q, inst, r.tuple)
            assert r.rho == rho
            assert len(r.contingency) <= 1
