from __future__ import annotations

from typing import Any, Dict, Optional


class VSystemError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def __str__(self) -> str:
        return self.message


class DomainError(VSystemError, ValueError):
    exit_code = 2

    def __init__(self, field: str, value: Any, bound: str) -> None:
        super().__init__(
            f"{field}={value!r} violates {bound}",
            field=field,
            value=value,
            bound=bound,
        )
        self.field = field
        self.value = value
        self.bound = bound


class SingularGenerator(VSystemError):
    pass


class StepFailure(VSystemError):
    def __init__(self, message: str, t_reached: float) -> None:
        super().__init__(f"{message} (reached t={t_reached!r})", t_reached=t_reached)
        self.t_reached = t_reached


class NoRoot(VSystemError):
    pass


class NoCrossing(VSystemError):
    pass


class OutsideValidity(VSystemError):
    pass


class WrongRegime(VSystemError):
    pass


class WrongBranch(VSystemError):
    pass


class SplittingTooLarge(VSystemError):
    pass


class DegenerateEigenvector(VSystemError):
    def __init__(self, message: str, column: Optional[int] = None) -> None:
        super().__init__(message, column=column)
        self.column = column


class PanelUnavailable(VSystemError):
    exit_code = 4


__all__ = [
    "DegenerateEigenvector",
    "DomainError",
    "NoCrossing",
    "NoRoot",
    "OutsideValidity",
    "PanelUnavailable",
    "SingularGenerator",
    "SplittingTooLarge",
    "StepFailure",
    "VSystemError",
    "WrongBranch",
    "WrongRegime",
]
