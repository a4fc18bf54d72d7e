"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CausalDBError(Exception):
    """Base class; the CLI maps every subclass to exit code 1."""


class QuerySyntaxError(CausalDBError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SchemaError(CausalDBError):
    """Unknown relation, arity mismatch, conflicting annotations."""


class DataError(CausalDBError):
    """Problems reading CSV or annotation files."""


class NotAnAnswer(CausalDBError):
    pass


class IsAnAnswer(CausalDBError):
    pass


class NotApplicable(CausalDBError):
    pass


class ResourceLimit(CausalDBError):
    def __init__(self, message: str, best_bound=None):
        super().__init__(message)
        self.best_bound = best_bound


class ClassifierBug(CausalDBError):
    """The dichotomy search ended on a query that is not a canonical hard query."""
