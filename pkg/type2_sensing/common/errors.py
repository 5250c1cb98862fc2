class SensingError(Exception):
    """Base class for all errors raised by type2_sensing."""


class ConfigError(SensingError):
    """Invalid or unreadable configuration."""


class NumericalError(SensingError):
    """A numerical routine failed to reach its tolerance.

    Args:
        message (str): What failed.
        operation (str): Name of the failing operation.
        partial (float | None): Partial value reached before giving up.
        bound (float | None): Bound on the error of `partial`.
        trial (int | None): Monte-Carlo trial index, when raised inside a trial.
    """

    def __init__(
        self,
        message: str,
        *,
        operation: str,
        partial: float | None = None,
        bound: float | None = None,
        trial: int | None = None,
    ):
        super().__init__(message)
        self.operation = operation
        self.partial = partial
        self.bound = bound
        self.trial = trial

    def __str__(self) -> str:
        text = f"{self.operation}: {self.args[0]}"
        if self.trial is not None:
            text += f" (trial {self.trial})"
        return text


class CalibrationError(SensingError):
    """Target false-alarm rate lies outside the achievable range."""
