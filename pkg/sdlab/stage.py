import uuid
from abc import ABC, abstractmethod
from typing import Any, Optional

from sdlab.item import CheckItem


class NameMixin:
    """
    Simple mixin for setting a name to an object
    """

    def set_name(self, name: str):
        self._name = name

    @property
    def name(self) -> str:
        return getattr(self, "_name", f"{self.__class__.__name__}_{uuid.uuid4()}")

    def __str__(self) -> str:
        return self.name


class Stage(NameMixin, ABC):
    """
    Extend this class and override :meth:`.Stage.process` for defining a stage of the check pipeline
    """

    def on_start(self) -> Any:
        """
        Called by the pipeline once the stage is appended, before any item is processed
        """
        pass

    @abstractmethod
    def process(self, item: CheckItem) -> CheckItem:
        """
        Process a single check item.
        Must be overridden for properly defining a stage

        :return: The same item instance processed and enriched by the stage
        """
        return item

    def __str__(self) -> str:
        return f"Stage {self.name}"


class Source(ABC):
    """
    Extend this for defining a source of check items
    """

    @abstractmethod
    def pop(self) -> Optional[CheckItem]:
        """
        Generate items for feeding a pipeline.
        Must be overridden for properly defining a source.
        Call :meth:`.Source.stop` when item generation is ended

        :return: The generated item, if None it is simply ignored (e.g. after calling :meth:`.Source.stop`)
        """
        pass

    def stop(self):
        """
        Declare the end of item generation
        """
        self._is_stopped = True

    @property
    def is_stopped(self) -> bool:
        """
        True if the source has called the stop event
        """
        return getattr(self, "_is_stopped", False)
