"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""

from __future__ import annotations


class MitlGuardError(Exception):
    exit_code = 4


class ValidationError(MitlGuardError):
    """Malformed input: model files, formulas, kernels."""

    exit_code = 2


class UnsupportedSpec(MitlGuardError):
    exit_code = 3


class RuntimeFailure(MitlGuardError):
    exit_code = 4


class MitlSyntaxError(ValidationError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class UndeclaredAtom(ValidationError):
    pass


class EmptyInterval(ValidationError):
    pass


class UnknownClock(ValidationError):
    pass


class InfeasibleRun(ValidationError):
    def __init__(self, index: int, reason: str = "no enabled edge"):
        super().__init__(f"infeasible run at step {index}: {reason}")
        self.index = index


class UnsupportedFragment(UnsupportedSpec):
    pass


class NondeterministicAutomaton(ValidationError):
    pass


class AlphabetMismatch(ValidationError):
    pass


class ClockSetMismatch(ValidationError):
    pass


class EmptyCellSample(RuntimeFailure):
    pass


class OracleRange(RuntimeFailure):
    pass


class DurationGridError(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class IncompletePolicy(RuntimeFailure):
    def __init__(self, key):
        super().__init__(f"policy has no row for {key!r}")
        self.key = key


class InvalidPolicyRow(ValidationError):
    pass


class HorizonTooShort(RuntimeFailure):
    def __init__(self, count: int, total: int):
        super().__init__(f"{count} of {total} rollouts ended Inconclusive; increase the horizon")
        self.count = count
        self.total = total


class SolverError(RuntimeFailure):
    pass


class SchemaError(ValidationError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
