from typing import Optional


class AscdError(Exception):
    """Base class for every error raised by asyscd"""


class UsageError(AscdError):
    pass


class DimensionError(AscdError):
    pass


class ProblemError(AscdError):
    """A quadratic problem violates a construction invariant"""


class ProblemSizeError(AscdError):
    pass


class TheoryError(AscdError):
    pass


class DiagnosticError(AscdError):
    pass


class VerificationFailure(AscdError):
    pass


class AdmissibilityError(AscdError):
    """The delay bound is too large for the requested steplength plan"""

    def __init__(self, message: str, max_tau: Optional[int]):
        if max_tau is None:
            hint = "no delay is admissible for this dimension and Lipschitz ratio"
        else:
            hint = f"largest admissible tau is {max_tau}"
        super().__init__(f"{message}; {hint}. Pass --gamma to force a steplength.")
        self.max_tau = max_tau


class DelayBoundError(AscdError):
    def __init__(self, step: int, lag: int, tau: int):
        super().__init__(
            f"Delay schedule violates its bound at step {step}: lag {lag} is outside [0, min({step}, {tau})]"
        )
        self.step = step
        self.lag = lag
        self.tau = tau


class ParseError(AscdError):
    def __init__(self, path, line: int, detail: str):
        super().__init__(f"{path}:{line}: {detail}")
        self.path = str(path)
        self.line = line
        self.detail = detail
