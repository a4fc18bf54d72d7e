"""Resource budgets for the exponential searches.

Defaults can be overridden with ``CAUSALDB_BUDGET``, a comma separated list
of ``key=value`` pairs, e.g. ``CAUSALDB_BUDGET=exact_nodes=5000,brute_max=16``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

from .errors import CausalDBError

ENV_VAR = "CAUSALDB_BUDGET"


@dataclass(frozen=True)
class Budget:
    exact_nodes: int = 2_000_000
    brute_max: int = 20
    weakening_states: int = 200_000
    datalog_rules: int = 20_000
    candidates: int = 100_000

    @classmethod
    def from_env(cls, environ=None) -> "Budget":
        environ = os.environ if environ is None else environ
        spec = environ.get(ENV_VAR, "").strip()
        if not spec:
            return cls()
        return cls().override(spec)

    def override(self, spec: str) -> "Budget":
        names = {f.name for f in dataclasses.fields(self)}
        values = {}
        for item in spec.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, raw = item.partition("=")
            key = key.strip()
            if not sep or key not in names:
                raise CausalDBError(f"bad budget entry {item!r}; known keys: {sorted(names)}")
            try:
                values[key] = int(raw)
            except ValueError:
                raise CausalDBError(f"budget {key} must be an integer, got {raw!r}") from None
        return dataclasses.replace(self, **values)


def default_budget() -> Budget:
    return Budget.from_env()
