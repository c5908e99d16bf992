"""Exception types shared across the package."""


class DMKError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DMKError, ValueError):
    """An argument violates a documented precondition."""


class NumericalDegeneracyError(DMKError, ArithmeticError):
    """A computation hit a degenerate case (singular matrix, collapsed weights...)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
        self._message = message

    def __reduce__(self):
        return (self.__class__, (self._message, self.step))


class StageError(DMKError):
    """A pipeline stage failed; carries the stage name for error reports."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self._message = message

    def __reduce__(self):
        return (self.__class__, (self.stage, self._message))
