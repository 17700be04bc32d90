"""Exception taxonomy shared by the library and the CLI.

Exit codes: 0 success, 2 input error, 3 capability error, 4 accuracy error,
5 verification failure.
"""


class PermutonError(Exception):
    exit_code = 1


class InputError(PermutonError):
    """Malformed or out-of-domain user input."""

    exit_code = 2


class CapabilityError(PermutonError):
    """Request is valid but beyond the practical range of the implementation."""

    exit_code = 3


class AccuracyError(PermutonError):
    """Quadrature or estimation failed to reach the requested tolerance.

    Carries the best available estimate and its error bound so callers can
    decide whether to proceed anyway.
    """

    exit_code = 4

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class VerificationError(PermutonError):
    """A verification suite criterion failed."""

    exit_code = 5
