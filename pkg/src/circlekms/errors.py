"""Exceptions shared across the library.

Two families matter for the CLI exit codes: validation failures (bad input,
out-of-scope maps, divergent series) map to exit code 2, resource guards
(depth, branch and denominator limits) map to exit code 3.
"""


class CircleKmsError(Exception):
    """Base class for all library errors."""


class MapSpecError(CircleKmsError):
    """A map specification document is malformed or violates an invariant."""

    def __init__(self, message, line=None, token=None):
        detail = message
        if line is not None:
            detail += f" (line {line}"
            if token is not None:
                detail += f", token {token!r}"
            detail += ")"
        super().__init__(detail)
        self.line = line
        self.token = token


class ValidationError(CircleKmsError):
    """Arguments are structurally valid but violate a precondition."""


class LocallyInjectiveError(ValidationError):
    """The map has no turning point, so the classification is out of scope.

    Carries the inverse temperature of the unique KMS state in the algebraic
    case so the caller can surface it as a diagnostic.
    """

    def __init__(self, degree):
        self.degree = degree
        if degree >= 2:
            hint = f"unique KMS at beta = log {degree}"
        elif degree <= -2:
            hint = f"unique KMS at beta = 2 log {abs(degree)}"
        else:
            hint = "degree in {-1, 0, 1} without turning points"
        super().__init__(
            "locally injective map -- outside scope; " + hint
            + " per the algebraic case"
        )


class DivergentSeriesError(ValidationError):
    """The partition function cannot be certified finite at this q.

    Raised both when q >= e^{-h} is proven (no KMS state exists below the
    entropy) and when admissibility cannot be certified from the available
    entropy data; `reason` distinguishes the two.
    """

    def __init__(self, q, reason):
        self.q = q
        self.reason = reason
        super().__init__(f"divergent partition function at q = {q} ({reason})")


class TruncationMismatchError(ValidationError):
    """Algebra elements or measures built over different truncations."""


class ResourceLimitError(CircleKmsError):
    """A configured resource guard fired (depth, branches, denominator bits)."""

    def __init__(self, guard, limit, message=""):
        self.guard = guard
        self.limit = limit
        text = f"resource guard '{guard}' exceeded (limit {limit})"
        if message:
            text += ": " + message
        super().__init__(text)
