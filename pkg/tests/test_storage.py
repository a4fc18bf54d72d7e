import pytest

from causaldb.errors import DataError, SchemaError
from causaldb.query import parse_query
from causaldb.storage import (
    Database,
    TupleRow,
    active_domain,
    generate_whyno_candidates,
    load,
    load_candidates,
    load_directory,
    parse_annotations,
    resolve_partition,
)
from helpers import DATA, example21


def test_load_example21():
    db = load_directory(DATA / "example21")
    assert len(db) == 10
    assert not db.exogenous
    assert [r.values for r in db.rows("R")][:2] == [("a1", "a5"), ("a2", "a1")]
    assert db.find("S", ["a6"]).endo


def test_annotation_makes_rows_exogenous():
    db = load_directory(DATA / "example21", DATA / "example21_exo.ann")
    assert {db.ref(t) for t in db.exogenous} == {"R(a4,a3)", "R(a4,a2)"}


def test_annotation_rows_and_comparisons(tmp_path):
    (tmp_path / "M.csv").write_text("id,year\n1,1999\n2,2009\n3,2010\n")
    ann = parse_annotations("exo M *\nendo M where year>2008\nexo M rows 3\n")
    db = load(None, [tmp_path / "M.csv"], ann)
    assert {db.get(t).values[0] for t in db.endogenous} == {"2"}


def test_empty_csv_gives_empty_relation(tmp_path):
    (tmp_path / "R.csv").write_text("a,b\n")
    db = load(None, [tmp_path / "R.csv"])
    assert "R" in db.relations and db.rows("R") == ()


def test_load_errors(tmp_path):
    (tmp_path / "R.csv").write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError, match=r"R.csv:3"):
        load(None, [tmp_path / "R.csv"])
    with pytest.raises(DataError, match="missing file"):
        load(None, [tmp_path / "nope.csv"])


def test_duplicates_collapse_but_conflicts_fail(tmp_path):
    (tmp_path / "R.csv").write_text("a\n1\n1\n2\n")
    assert len(load(None, [tmp_path / "R.csv"])) == 2
    with pytest.raises(DataError, match="both endogenous and exogenous"):
        load(None, [tmp_path / "R.csv"], parse_annotations("exo R rows 1\n"))


def test_bad_annotation_line():
    with pytest.raises(DataError, match="line|:1:"):
        parse_annotations("maybe R *")


def test_load_is_idempotent():
    a = load_directory(DATA / "imdb", DATA / "imdb.ann")
    b = load_directory(DATA / "imdb", DATA / "imdb.ann")
    assert a == b


def test_active_domain():
    assert active_domain(example21()) == {"a1", "a2", "a3", "a4", "a5", "a6"}
    assert active_domain(Database()) == frozenset()
    assert active_domain(Database.build({"R": [("c", "c")]})) == {"c"}


def test_partition_invariants():
    db = example21({"R": [("a4", "a3")]})
    assert db.endogenous | db.exogenous == db.ids
    assert not db.endogenous & db.exogenous


def test_duplicate_rows_rejected():
    with pytest.raises(DataError):
        Database([TupleRow(0, "R", ("a",)), TupleRow(1, "R", ("a",))])


def test_resolve_partition_precedence():
    db = example21()
    q = parse_query("@exogenous R\nq :- R(x, y), S^x(y).")
    out = resolve_partition(q, db)
    assert not out.endogenous
    q = parse_query("@exogenous S\nq :- R(x, y), S^n(y).")
    assert resolve_partition(q, db).endogenous == db.endogenous
    with pytest.raises(SchemaError):
        resolve_partition(parse_query("q :- R^n(x, y), R^x(y, z)."), db)


def test_candidates_grid():
    db = Database.build({"R": [], "T": [("a",), ("b",)]})
    q = parse_query("q :- R(x, y).")
    pool = generate_whyno_candidates(db, q, 100)
    assert [r.values for r in pool.rows("R")] == [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")]
    assert pool.candidate and not pool.truncated
    assert pool.endogenous == pool.ids


def test_candidates_respect_constants_and_existing():
    db = Database.build({"R": [("a_3", "a_4")], "S": [("a_3",)]})
    q = parse_query("q :- R('a_3', y).")
    pool = generate_whyno_candidates(db, q, 100)
    assert [r.values for r in pool.rows("R")] == [("a_3", "a_3")]
    assert not pool.ids & db.ids


def test_candidates_limit_zero():
    pool = generate_whyno_candidates(example21(), parse_query("q :- R(x, y)."), 0)
    assert len(pool) == 0 and pool.truncated


def test_load_candidates(tmp_path):
    db = example21()
    path = tmp_path / "c.csv"
    path.write_text("relation,v1\nS,a5\n")
    pool = load_candidates(path, db)
    assert [r.ref for r in pool] == ["S(a5)"]
    assert min(pool.ids) > db.max_id
