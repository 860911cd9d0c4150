"""Exception hierarchy.

Errors fall in three families that map onto the CLI exit codes and the
HTTP status codes of the service: usage problems, data/format problems,
and computation failures.
"""


class TSensError(Exception):
    """Base class for every error raised by this package."""

    kind = "error"


class UsageError(TSensError):
    kind = "usage"


class DataError(TSensError):
    """Malformed input: bad CSV, bad query text, invalid decomposition."""

    kind = "data"


class ArityError(DataError):
    pass


class QuerySyntaxError(DataError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SelfJoinUnsupported(DataError):
    pass


class UnknownRelation(DataError):
    pass


class UnknownAttribute(DataError):
    pass


class InvalidDecomposition(DataError):
    pass


class NotAPathQuery(DataError):
    pass


class CyclicQuery(DataError):
    pass


class ComputationError(TSensError):
    kind = "computation"


class CountOverflow(ComputationError):
    pass


class MemoryBudgetExceeded(ComputationError):
    def __init__(self, rows: int, limit: int):
        super().__init__(f"intermediate relation reached {rows} rows (limit {limit})")
        self.rows = rows
        self.limit = limit


class OracleGuardExceeded(ComputationError):
    pass
