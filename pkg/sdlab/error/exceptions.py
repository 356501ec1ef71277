from __future__ import annotations
from typing import Optional


class Error(Exception):
    """
    Base exception type of the library and of the check stages
    """

    def set_stage(self, stage: str):
        self._pipeline_stage = stage

    def get_stage(self) -> Optional[str]:
        return getattr(self, "_pipeline_stage", None)

    def with_exception(self, exception: Exception) -> Error:
        """
        Set the original exception (if any) that has generated this error,
        equivalent to `explicit exception chaining <https://www.python.org/dev/peps/pep-3134/#explicit-exception-chaining>`_
        """
        self.__cause__ = exception
        return self

    def get_exception(self) -> Optional[Exception]:
        """
        Get the original exception (if any) that has generated this error,
        equivalent to the `__cause__ <https://www.python.org/dev/peps/pep-3134/#explicit-exception-chaining>`_ attribute
        """
        return self.__cause__ or None


class SoftError(Error):
    """
    A type of exception which only marks a check item as failed, the item still goes through the following stages
    """

    pass


class ToleranceError(SoftError):
    """
    A property residual is beyond its tolerance
    """

    def __init__(self, message: str = "", residual: float = float("nan"), tolerance: float = float("nan")):
        super().__init__(message)
        self.residual = residual
        self.tolerance = tolerance


class CriticalError(Error):
    """
    A type of exception which provokes skipping all the remaining stages for a check item
    """

    pass


class DegreeError(Error, ValueError):
    """
    A form has a degree not admitted by an operation
    """

    pass


class GridMismatchError(Error, ValueError):
    """
    Fields defined on different grids are combined
    """

    pass


class DensityError(Error, ValueError):
    """
    The scalar density is not strictly positive
    """

    pass


class ConfigError(Error, ValueError):
    """
    Invalid configuration, the message names the offending field
    """

    pass


class SolverError(Error, RuntimeError):
    """
    Base error of time integration
    """

    time: Optional[float] = None

    def at_time(self, t: float) -> SolverError:
        """
        Annotate the error with the simulation time of the failing step
        """
        self.time = t
        return self

    def __str__(self) -> str:
        message = super().__str__()
        return message if self.time is None else f"{message} (t={self.time!r})"


class ConvergenceError(SolverError):
    """
    The implicit solver did not reach its tolerance
    """

    def __init__(self, message: str = "", residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NonFiniteError(SolverError):
    """
    A time step produced infinite or NaN values
    """

    def __init__(self, message: str = "", step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class ClosureError(Error, ValueError):
    """
    A reduced state is not closed, so it cannot be the exterior derivative of a configuration
    """

    pass
