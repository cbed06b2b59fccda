"""Exception taxonomy shared across the engine, with per-class process exit codes."""


class EngineError(Exception):
    """Base class for every failure the engine raises on purpose."""

    exit_code = 1


class SchemaError(EngineError):
    """Malformed schema document or domain definition."""

    exit_code = 2


class IngestError(EngineError):
    """CSV ingestion failure: missing columns, unreadable file, no usable rows."""

    exit_code = 3


class StatisticsError(EngineError):
    """Statistic selection failure: bad budgets, infeasible workload, overlap."""

    exit_code = 4


class PolynomialError(EngineError):
    """Compressed polynomial construction or evaluation failure."""

    exit_code = 5


class SolverError(EngineError):
    """Model fitting failure, including divergence."""

    exit_code = 6


class QueryError(EngineError):
    """Query handling failure."""

    exit_code = 7


class ParseError(QueryError):
    """The query text does not match the supported grammar."""


class PlanTooLargeError(QueryError):
    """A group-by plan would enumerate more groups than the configured limit."""


class SummaryFormatError(EngineError):
    """Summary file rejected: version, checksum, or recomputation mismatch."""

    exit_code = 8


class EvalError(EngineError):
    """Evaluation harness failure."""

    exit_code = 9
