"""Tuple sensitivity of counting conjunctive queries, and private answers built on it."""

from .errors import ComputationError, DataError, TSensError, UsageError
from .query import ConjunctiveQuery, JoinTree, gyo_decompose, parse_query
from .relation import Database, Relation
from .sensitivity import SensitivityReport, analyze, ls_acyclic, ls_general, ls_path, topk_bound

__all__ = [
    "ComputationError",
    "ConjunctiveQuery",
    "DataError",
    "Database",
    "JoinTree",
    "Relation",
    "SensitivityReport",
    "TSensError",
    "UsageError",
    "analyze",
    "gyo_decompose",
    "ls_acyclic",
    "ls_general",
    "ls_path",
    "parse_query",
    "topk_bound",
]

__version__ = "0.1.0"
