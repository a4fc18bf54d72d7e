"""Command-line front end.

Exit codes: 0 on success, 1 on domain errors (not an answer, resource
limits, bad data), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .budget import Budget
from .causality import why_no_causes, why_so_causes, whyno_instance
from .complexity import classify
from .datalog import generate_program, relation_pattern
from .errors import CausalDBError
from .lineage import lineage, n_lineage, remove_redundant
from .query import parse_query, specialize
from .responsibility import choose_solver, rank_causes
from .storage import (
    Database,
    generate_whyno_candidates,
    load_candidates,
    load_directory,
    resolve_partition,
)

FORMAT_VERSION = 1


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causaldb", description="Causes and responsibility for query answers.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("-q", "--query", required=True, help="query file")
        if data:
            sp.add_argument("-d", "--data", help="directory with one CSV per relation")
            sp.add_argument("--annotations", help="endogenous/exogenous annotation file")
            sp.add_argument("--answer", help="answer tuple, comma separated (omit for Boolean queries)")
        sp.add_argument("--format", choices=["json", "table"], default="json")
        sp.add_argument("--explain", action="store_true", help="attach witnesses and certificates")

    def whyno(sp):
        sp.add_argument("--mode", choices=["why-so", "why-no"], default="why-so")
        sp.add_argument("--candidates", help="CSV of candidate tuples for why-no (Rel,v1,...)")
        sp.add_argument("--generate-candidates", type=int, metavar="N", help="generate up to N candidates")

    sp = sub.add_parser("causes", help="list actual causes")
    common(sp)
    whyno(sp)
    sp = sub.add_parser("responsibility", help="rank causes by responsibility")
    common(sp)
    whyno(sp)
    sp.add_argument("--solver", choices=["auto", "flow", "exact", "brute"], default="auto")
    sp = sub.add_parser("classify", help="complexity of responsibility for the query")
    common(sp, data=False)
    sp = sub.add_parser("lineage", help="print the lineage and its endogenous restriction")
    common(sp)
    sp = sub.add_parser("datalog-gen", help="print the causality program")
    common(sp)
    return p


# -- helpers -----------------------------------------------------------------


def _read_query(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read query file {path}: {exc.strerror}") from None
    return parse_query(text)


def _answer(q, raw: str | None):
    if raw is None:
        values = []
    else:
        values = next(csv.reader([raw], skipinitialspace=True), [])
        values = [v.strip() for v in values]
    if len(values) != len(q.head_vars):
        raise UsageError(
            f"query {q.name} has {len(q.head_vars)} head variables; --answer gave {len(values)} values"
        )
    return values


def _need_data(args):
    if not args.data:
        raise UsageError(f"{args.command} needs --data")


def _load(args) -> Database:
    _need_data(args)
    if not Path(args.data).is_dir():
        raise UsageError(f"--data {args.data} is not a directory")
    return load_directory(args.data, args.annotations)


def _candidates(args, q, db: Database, budget: Budget) -> Database:
    if args.candidates and args.generate_candidates is not None:
        raise UsageError("use either --candidates or --generate-candidates")
    if args.candidates:
        return load_candidates(args.candidates, db)
    limit = args.generate_candidates if args.generate_candidates is not None else budget.candidates
    return generate_whyno_candidates(db, q, limit)


def _emit(args, payload: dict, table: list[str]) -> None:
    if args.format == "json":
        print(json.dumps({"format": FORMAT_VERSION, **payload}, indent=2, ensure_ascii=False))
    else:
        print("\n".join(table))


# -- commands ----------------------------------------------------------------


def cmd_causes(args, budget: Budget) -> int:
    q = _read_query(args.query)
    answer = _answer(q, args.answer)
    db = _load(args)
    bq = specialize(q, answer)
    payload = {"command": "causes", "query": str(q), "answer": answer, "mode": args.mode}
    if args.mode == "why-no":
        cands = _candidates(args, bq, db, budget)
        causes = why_no_causes(bq, db, cands)
        inst = whyno_instance(db, cands)
        payload["candidates"] = len(cands)
        payload["truncated"] = cands.truncated
    else:
        if args.candidates or args.generate_candidates is not None:
            raise UsageError("candidates only apply to --mode why-no")
        causes = why_so_causes(bq, db)
        inst = resolve_partition(bq, db)
    rows = []
    for c in causes:
        d = {"tuple": c.ref, "kind": c.kind}
        if args.explain:
            d["witness"] = sorted(inst.ref(t) for t in c.witness)
        rows.append(d)
    payload["causes"] = rows
    table = [f"{'kind':<15} tuple"]
    for d in rows:
        line = f"{d['kind']:<15} {d['tuple']}"
        if args.explain:
            line += "   witness: " + ", ".join(d["witness"])
        table.append(line)
    _emit(args, payload, table)
    return 0


def cmd_responsibility(args, budget: Budget) -> int:
    q = _read_query(args.query)
    answer = _answer(q, args.answer)
    db = _load(args)
    bq = specialize(q, answer)
    cands = None
    if args.mode == "why-no":
        cands = _candidates(args, bq, db, budget)
    elif args.candidates or args.generate_candidates is not None:
        raise UsageError("candidates only apply to --mode why-no")
    results, inst = rank_causes(bq, db, (), args.mode, cands, args.solver, budget)
    payload = {"command": "responsibility", "query": str(q), "answer": answer, "mode": args.mode}
    if args.explain and args.mode == "why-so":
        payload["solver_choice"] = choose_solver(bq, db, budget) if args.solver == "auto" else args.solver
        payload["classification"] = classify(bq, budget=budget).to_json()
    payload["results"] = [r.to_json(inst) for r in results]
    table = [f"{'rho':<8} {'rho_float':<9} tuple"]
    for r in results:
        line = f"{str(r.rho):<8} {round(float(r.rho), 4):<9} {r.ref}"
        if args.explain and r.contingency is not None:
            line += "   contingency: {" + ", ".join(sorted(inst.ref(g) for g in r.contingency)) + "}"
        table.append(line)
    _emit(args, payload, table)
    return 0


def cmd_classify(args, budget: Budget) -> int:
    q = _read_query(args.query)
    if q.head_vars:
        q = specialize(q, [f"_{v}" for v in q.head_vars])
    verdict = classify(q, budget=budget)
    payload = {"command": "classify", "query": str(q), **verdict.to_json()}
    table = [f"verdict: {verdict.kind}"]
    if verdict.weakening is not None:
        for step in verdict.weakening.steps:
            table.append(f"  {step.rule} {step.atom}" + (f" +{step.var}" if step.var else ""))
        table.append("  order: " + ", ".join(verdict.weakening.order))
    for step in verdict.chain:
        table.append(f"  {step.rule}: {step.after}")
    if verdict.terminal:
        table.append(f"  terminal: {verdict.terminal}")
    if verdict.pattern:
        table.append(f"  pattern: {verdict.pattern}")
    for note in verdict.notes:
        table.append(f"  note: {note}")
    _emit(args, payload, table)
    return 0


def cmd_lineage(args, budget: Budget) -> int:
    q = _read_query(args.query)
    answer = _answer(q, args.answer)
    db = _load(args)
    bq = specialize(q, answer)
    inst = resolve_partition(bq, db)
    phi = lineage(bq, inst)
    phin = n_lineage(phi, inst)
    minimal = remove_redundant(phin)
    payload = {
        "command": "lineage",
        "query": str(q),
        "answer": answer,
        "lineage": phi.to_json(inst),
        "n_lineage": phin.to_json(inst),
        "minimal": minimal.to_json(inst),
    }
    table = [
        f"lineage:   {phi.render(inst)}",
        f"n-lineage: {phin.render(inst)}",
        f"minimal:   {minimal.render(inst)}",
    ]
    _emit(args, payload, table)
    return 0


def cmd_datalog(args, budget: Budget) -> int:
    q = _read_query(args.query)
    answer = _answer(q, args.answer)
    bq = specialize(q, answer)
    pattern = None
    if args.data:
        pattern = relation_pattern(bq, _load(args))
    program = generate_program(bq, pattern, budget)
    s1, s2 = program.strata
    payload = {
        "command": "datalog-gen",
        "query": str(q),
        "pattern": program.pattern,
        "strata": [[str(r) for r in s1], [str(r) for r in s2]],
        "program": str(program),
    }
    _emit(args, payload, [str(program).rstrip("\n")])
    return 0


COMMANDS = {
    "causes": cmd_causes,
    "responsibility": cmd_responsibility,
    "classify": cmd_classify,
    "lineage": cmd_lineage,
    "datalog-gen": cmd_datalog,
}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        budget = Budget.from_env()
        return COMMANDS[args.command](args, budget)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"causaldb: error: {exc}", file=sys.stderr)
        return 2
    except CausalDBError as exc:
        print(f"causaldb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
