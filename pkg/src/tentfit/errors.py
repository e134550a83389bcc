"""Exception hierarchy shared by every tentfit module.

Each error carries a stable ``code`` string; the CLI maps a few of them to
fixed process exit codes (see :mod:`tentfit.cli`).
"""


class TentfitError(Exception):
    code = "TENTFIT_ERROR"


class InfeasibleLP(TentfitError):
    code = "INFEASIBLE"


class UnboundedLP(TentfitError):
    code = "UNBOUNDED"


class NumericalFailure(TentfitError):
    code = "NUMERICAL_FAILURE"


class OutsideHull(TentfitError):
    """Raised where a finite tent value is required but x is not in the hull."""

    code = "OUTSIDE_HULL"


class DegenerateHull(TentfitError):
    code = "DEGENERATE_HULL"


class DegenerateBody(TentfitError):
    code = "DEGENERATE_BODY"


class OracleFailure(TentfitError):
    code = "ORACLE_FAILURE"


class BudgetExceeded(TentfitError):
    code = "BUDGET_EXCEEDED"


class RTooSmall(TentfitError):
    code = "R_TOO_SMALL"


class RetryExhausted(TentfitError):
    code = "RETRY_EXHAUSTED"


class ParseError(TentfitError):
    code = "PARSE_ERROR"


class ModelSchemaMismatch(TentfitError):
    code = "MODEL_SCHEMA_MISMATCH"


class ResolutionTooCoarse(TentfitError):
    code = "RESOLUTION_TOO_COARSE"


class SizeCap(TentfitError):
    code = "SIZE_CAP"
