"""Exception hierarchy.

Every error carries a machine-readable ``code`` and the process ``exit_code``
the CLI maps it to (2 argument, 3 feasibility/guard, 4 validation).
"""


class PermLimitError(Exception):
    code = "error"
    exit_code = 1


class ArgumentError(PermLimitError, ValueError):
    code = "argument"
    exit_code = 2


class InvalidPermutation(ArgumentError):
    code = "invalid_permutation"


class StructuralError(ArgumentError):
    """Matrix is not square, or has entries outside [0, 1]."""

    code = "structure"


class DomainError(ArgumentError):
    code = "domain"


class TieError(ArgumentError):
    code = "tie"


class FeasibilityError(PermLimitError):
    code = "feasibility"
    exit_code = 3


class SizeError(FeasibilityError):
    """An enumeration guard was exceeded."""

    code = "size"


class ValidationError(PermLimitError, ValueError):
    code = "validation"
    exit_code = 4
