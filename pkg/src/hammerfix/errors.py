"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad kernels, bad
expressions, numerically hopeless integrands) and :class:`ContradictionError`
(an invariant that must hold did not). The CLI maps them to exit codes 1 and 2.
"""


class HammerfixError(Exception):
    """Base class. ``stage`` is filled in by the solver pipeline."""

    stage = None

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


class InputError(HammerfixError):
    pass


class ExprSyntaxError(InputError):
    def __init__(self, message, source, pos):
        self.source = source
        self.pos = pos
        pointer = " " * pos + "^"
        super().__init__(f"{message} at position {pos}\n  {source}\n  {pointer}")


class ExprDomainError(InputError):
    def __init__(self, message, subexpr=None):
        self.subexpr = subexpr
        if subexpr is not None:
            message = f"{message} in sub-expression '{subexpr}'"
        super().__init__(message)


class ConeViolationError(InputError):
    pass


class DegenerateCoefficientError(InputError):
    pass


class QuadratureError(InputError):
    pass


class ContradictionError(HammerfixError):
    """Raised when a proven invariant fails at runtime."""


class RootIsolationError(ContradictionError):
    pass
