"""Causes and responsibility for conjunctive query answers and non-answers."""

from types import ModuleType

from .budget import Budget
from .causality import CauseReport, conjunctive_fast_path, why_no_causes, why_so_causes, whyno_instance
from .complexity import Shape, Verdict, classify, dual_hypergraph, is_linear, weakening_closure
from .datalog import DatalogProgram, evaluate_program, generate_program
from .errors import (
    CausalDBError,
    ClassifierBug,
    DataError,
    IsAnAnswer,
    NotAnAnswer,
    NotApplicable,
    QuerySyntaxError,
    ResourceLimit,
    SchemaError,
)
from .lineage import Dnf, holds, lineage, n_lineage, remove_redundant, valuations
from .query import Atom, Query, Schema, format_query, parse_query, specialize
from .responsibility import (
    ResponsibilityResult,
    brute_force_responsibility,
    exact_responsibility,
    rank_causes,
    responsibility_flow,
    whyno_responsibility,
)
from .storage import Database, TupleRow, active_domain, generate_whyno_candidates, load, load_directory

__all__ = [name for name, obj in globals().items() if not name.startswith("_") and name != "ModuleType" and not isinstance(obj, ModuleType)]
del ModuleType
