from __future__ import annotations

import math
from typing import Any, Dict, Generator, KeysView, Optional, Union

from sdlab.defaults import PAYLOAD_SNIPPET_SIZE
from sdlab.error.exceptions import CriticalError, SoftError


class CheckItem:
    """
    A single property check going through the check pipeline.
    It is generated by a :class:`.stage.Source` and collects the residual, the verdict and the errors of the stages
    """

    def __init__(self, suite: str, name: str, tolerance: float):
        self._errors = []
        self._critical_errors = []
        self._meta = {}
        self._timings = {}
        self._payload: Dict[str, Any] = {
            "suite": suite,
            "name": name,
            "tolerance": tolerance,
            "residual": None,
        }

    def __str__(self) -> str:
        return f"Check item {self.id} with payload {self.payload_snippet()}..."

    @property
    def payload(self) -> Dict[str, Any]:
        """
        The data of the check: suite, property name, tolerance and, once evaluated, the residual
        """
        return self._payload

    def payload_snippet(self, max_size: int = PAYLOAD_SNIPPET_SIZE) -> str:
        return str(self._payload)[:max_size]

    @property
    def id(self) -> str:
        return f"{self.suite}.{self.name}"

    @property
    def suite(self) -> str:
        return self._payload["suite"]

    @property
    def name(self) -> str:
        return self._payload["name"]

    @property
    def tolerance(self) -> float:
        return self._payload["tolerance"]

    @property
    def residual(self) -> Optional[float]:
        return self._payload["residual"]

    @residual.setter
    def residual(self, value: float):
        self._payload["residual"] = float(value)

    @property
    def passed(self) -> bool:
        """
        True if the check has a finite residual and no stage has reported an error on it
        """
        return (
            self.residual is not None
            and not math.isnan(self.residual)
            and not self.has_errors()
            and not self.has_critical_errors()
        )

    def set_metadata(self, field: str, value: Any) -> CheckItem:
        """
        Add a metadata, something we want to remember but keep outside the actual data in :attr:`.CheckItem.payload`
        """
        self._meta[field] = value
        return self

    def get_metadata(self, field: str) -> Any:
        return self._meta.get(field)

    @property
    def metadata_fields(self) -> KeysView[str]:
        return self._meta.keys()

    def set_timing(self, stage_name: str, seconds: float) -> CheckItem:
        """
        Set the time spent by a stage (referenced by its name) for processing the item
        """
        self._timings[stage_name] = seconds
        return self

    def get_timing(self, stage_name: str) -> Optional[float]:
        return self._timings.get(stage_name)

    @property
    def timed_stages(self) -> KeysView[str]:
        return self._timings.keys()

    def has_errors(self) -> bool:
        """
        True if the item has raised an :class:`.error.exceptions.SoftError` in some stage processing
        """
        return any(self._errors)

    def has_critical_errors(self) -> bool:
        """
        True if the item has raised a :class:`.error.exceptions.CriticalError` or any un-managed exception in some stage processing
        """
        return any(self._critical_errors)

    def soft_errors(self) -> Generator[SoftError, None, None]:
        for e in self._errors:
            yield e

    def critical_errors(self) -> Generator[CriticalError, None, None]:
        for e in self._critical_errors:
            yield e

    def add_soft_error(self, stage: str, exception: Union[SoftError, Exception]) -> SoftError:
        """
        Add an :class:`.error.exceptions.SoftError` generated in a stage (referenced by its name) for the item

        :param exception: It can be an :class:`.error.exceptions.SoftError` instance or any exception, which will be encapsulated in an :class:`.error.exceptions.SoftError`
        """
        if type(exception) is not CriticalError:
            if isinstance(exception, SoftError):
                exception.set_stage(stage)
                self._errors.append(exception)
                return exception
            elif isinstance(exception, Exception):
                error = SoftError(str(exception))
                error.with_exception(exception)
                error.set_stage(stage)
                self._errors.append(error)
                return error
        raise ValueError("Add a SoftError or a generic exception")

    def add_critical_error(self, stage: str, exception: Union[CriticalError, Exception]) -> CriticalError:
        """
        Add a :class:`.error.exceptions.CriticalError` generated in a stage (referenced by its name) for the item

        :param exception: It can be a :class:`.error.exceptions.CriticalError` instance or any exception, which will be encapsulated in a :class:`.error.exceptions.CriticalError`
        """
        if not isinstance(exception, SoftError):
            if isinstance(exception, CriticalError):
                exception.set_stage(stage)
                self._critical_errors.append(exception)
                return exception
            elif isinstance(exception, Exception):
                error = CriticalError(str(exception))
                error.with_exception(exception)
                error.set_stage(stage)
                self._critical_errors.append(error)
                return error
        raise ValueError("Add a CriticalError or a generic exception")

    def describe(self) -> str:
        """
        Short description of the first error met, if any
        """
        for error in list(self._critical_errors) + list(self._errors):
            return f"{error.get_stage()}: {error}"
        return ""
