"""Errors raised by metagap, each carrying the CLI exit code it maps to."""


class MetagapError(Exception):
    """
    Base class for all metagap errors.
    """

    exit_code: int = 1


class UsageError(MetagapError):
    exit_code = 2


class DataFormatError(MetagapError):
    """
    An input file could not be parsed, or disagrees with the manifest it claims.
    """

    exit_code = 3


class SymmetryViolation(DataFormatError):
    """
    A pixel matrix is not invariant under the D4 group.

    ```python
    from metagap.errors import SymmetryViolation
    err = SymmetryViolation((0, 1), (1, 0))
    assert "(0, 1)" in str(err)
    ```
    """

    first: tuple[int, int]
    second: tuple[int, int]

    def __init__(self, first: tuple[int, int], second: tuple[int, int]):
        self.first = first
        self.second = second
        super().__init__(f"Matrix is not D4-symmetric: pixel {first} differs from its image {second}")

    def __reduce__(self):
        return type(self), (self.first, self.second)


class InfeasibleError(MetagapError):
    exit_code = 4


class BudgetExhausted(MetagapError):
    """
    Rejection sampling ran out of attempts.
    """

    exit_code = 4
    attempts: int

    def __init__(self, attempts: int):
        self.attempts = attempts
        super().__init__(f"No accepted sample after {attempts} attempts")

    def __reduce__(self):
        return type(self), (self.attempts,)


class SolverError(MetagapError):
    """
    The eigen-solver failed, optionally at a known wavevector.
    """

    exit_code = 5
    message: str
    wavevector: tuple[float, float] | None

    def __init__(self, message: str, wavevector: tuple[float, float] | None = None):
        self.wavevector = wavevector
        self.message = message
        if wavevector is not None:
            message = f"{message} (wavevector {wavevector[0]:.6g}, {wavevector[1]:.6g} rad/m)"
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self.message, self.wavevector)


class AssemblyError(MetagapError):
    """
    The Bloch-reduced matrices failed an internal consistency check.
    """

    exit_code = 5
