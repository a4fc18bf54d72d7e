import itertools
import random
from dataclasses import replace

import pytest

from causaldb.complexity import (
    NP_HARD,
    OPEN,
    PTIME,
    RewriteStep,
    Shape,
    WeakeningStep,
    apply_rewrite,
    apply_weakening,
    classify,
    dual_hypergraph,
    is_isomorphic_canonical,
    is_linear,
    is_weakly_linear,
    rewrite_steps,
    shape_of,
    verify_verdict,
    weakening_closure,
)
from causaldb.budget import Budget
from causaldb.errors import ResourceLimit
from causaldb.query import parse_query

H1 = "A^n(x), B^n(y), C^n(z), W^x(x,y,z)"
H2 = "R^n(x,y), S^n(y,z), T^n(z,x)"
H3 = "A^n(x), B^n(y), C^n(z), R^x(x,y), S^x(y,z), T^x(z,x)"


def brute_linear(shape: Shape) -> bool:
    for perm in itertools.permutations(range(len(shape.atoms))):
        pos = {a: i for i, a in enumerate(perm)}
        if all(max(pos[i] for i in shape.sg(v)) - min(pos[i] for i in shape.sg(v)) + 1 == len(shape.sg(v))
               for v in shape.variables):
            return True
    return False


def test_dual_hypergraph():
    h = dual_hypergraph("R(x,y), S(y,z)")
    assert h.vertices == (0, 1)
    assert h.hyperedges == {"x": {0}, "y": {0, 1}, "z": {1}}


def test_linear_examples():
    assert is_linear("R(x,y), S(y,z)") == ["R", "S"]
    assert is_linear(H2) is None
    order = is_linear("A(x), S1(x,v), S2(v,y), R(y,u), S3(y,z), T(z,w), B(z)")
    assert order is not None


def test_linear_matches_permutations():
    rng = random.Random(1)
    for _ in range(300):
        n = rng.randint(1, 5)
        atoms = []
        for i in range(n):
            vs = "".join(v for v in "xyzuw" if rng.random() < 0.35)
            atoms.append(f"A{i}({','.join(vs)})")
        s = Shape.parse(", ".join(atoms))
        assert (is_linear(s) is not None) == brute_linear(s)


def test_weakening_side_conditions():
    s = Shape.parse("R^n(x,y), S^x(y,z), T^n(z,x)")
    out = apply_weakening(s, WeakeningStep("dissociation", "S", "x"))
    assert out.atoms[1].vars == {"x", "y", "z"}
    with pytest.raises(ValueError, match="not exogenous"):
        apply_weakening(s, WeakeningStep("dissociation", "R", "z"))
    with pytest.raises(ValueError, match="dominates"):
        apply_weakening(s, WeakeningStep("domination", "R"))
    t = Shape.parse("R^n(x,y), V^n(x)")
    assert apply_weakening(t, WeakeningStep("domination", "R")).atoms[0].kind == "x"


def test_dissociation_makes_triangle_linear():
    w = weakening_closure("R^n(x,y), S^x(y,z), T^n(z,x)")
    assert w is not None
    assert [s.rule for s in w.steps] == ["dissociation"]


def test_keep_blocks_domination():
    assert weakening_closure("R^n(x,y), S^n(y,z), T^n(z,x), V^n(x)") is not None
    assert weakening_closure("R^n(x,y), S^n(y,z), T^n(z,x), V^n(x)", keep={"R", "T"}) is None


def test_weakening_budget():
    with pytest.raises(ResourceLimit):
        weakening_closure(H2.replace("S^n", "S^x").replace("T^n", "T^x") + ", K^x(x,u), L^x(u,y)",
                          budget=Budget(weakening_states=1))


def test_rewrite_side_conditions():
    s = Shape.parse(H2)
    with pytest.raises(ValueError, match="not dominated"):
        apply_rewrite(s, RewriteStep("delete-atom", atom="R"))
    with pytest.raises(ValueError, match="no atom contains"):
        apply_rewrite(Shape.parse("R(x), S(y)"), RewriteStep("add-var", var="y", along="x"))
    out = apply_rewrite(s, RewriteStep("delete-var", var="x"))
    assert out.atoms[0].vars == {"y"}


def test_final_queries_rewrite_to_weakly_linear():
    for text in (H1, H2, H3):
        assert not is_weakly_linear(text)
        steps = rewrite_steps(text)
        assert steps
        for step in steps:
            assert is_weakly_linear(step.after), (text, step.rule)


def test_single_atom_rewrites():
    steps = rewrite_steps("R^n(x,y)")
    assert {s.rule for s in steps} == {"delete-var"}


def test_canonical_recognition():
    assert is_isomorphic_canonical(H1) == "h1"
    assert is_isomorphic_canonical("P^n(u,v), Q^n(v,w), M^n(w,u)") == "h2"
    assert is_isomorphic_canonical(H3.replace("R^x", "R^n")) == "h3"
    assert is_isomorphic_canonical("R^n(x,y), S^n(y,z)") is None


@pytest.mark.parametrize(
    "text,kind",
    [
        (H1, NP_HARD),
        (H2, NP_HARD),
        (H3, NP_HARD),
        ("R^n(x,y), S^n(y,z)", PTIME),
        ("R^n(x,y), S^x(y,z), T^n(z,x)", PTIME),
        ("R^n(x,y), S^n(y,z), T^n(z,x), V^n(x)", PTIME),
        ("R^n(x,y), S^n(y,z), T^n(z,u), K^n(u,x)", NP_HARD),
        ("A^n(x), R^n(x,y), S^n(y,z)", PTIME),
    ],
)
def test_classify_and_replay(text, kind):
    v = classify(text)
    assert v.kind == kind
    assert verify_verdict(v)


def test_four_cycle_ends_at_h2():
    assert classify("R^n(x,y), S^n(y,z), T^n(z,u), K^n(u,x)").terminal == "h2"


def test_self_joins():
    hard = parse_query("q :- R^n(x), S^x(x, y), R^n(y).")
    assert classify(hard).kind == NP_HARD
    assert classify(parse_query("q :- R^n(x, y), R^n(y, z).")).kind == OPEN


def test_mixed_note():
    q = parse_query("q :- R(x, y), S(y).")
    v = classify(q, {"R": "mixed"})
    assert v.kind == PTIME and v.notes


def test_verdict_stable_under_renaming():
    rng = random.Random(4)
    for text in (H1, H2, H3, "R^n(x,y), S^x(y,z), T^n(z,x)"):
        shape = Shape.parse(text)
        base = classify(shape).kind
        for _ in range(5):
            ren = dict(zip("xyz", rng.sample("pqr", 3)))
            renamed = Shape(tuple(replace(a, vars=frozenset(ren[v] for v in a.vars)) for a in shape.atoms))
            atoms = list(renamed.atoms)
            rng.shuffle(atoms)
            assert classify(Shape(tuple(atoms))).kind == base


def test_h3_proper_subqueries_are_ptime():
    atoms = [a.strip() for a in H3.replace("), ", ")|").split("|")]
    for k in range(1, len(atoms)):
        for sub in itertools.combinations(atoms, k):
            assert classify(", ".join(sub)).kind == PTIME, sub


def test_shape_of_query_defaults():
    s = shape_of(parse_query("@exogenous S\nq :- R(x, 'c'), S(x, x)."))
    assert [(a.name, a.vars, a.kind) for a in s.atoms] == [("R", {"x"}, "n"), ("S", {"x"}, "x")]
