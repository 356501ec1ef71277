from __future__ import annotations

import logging
import threading
from concurrent.futures.thread import ThreadPoolExecutor
from typing import Dict, Generator, List, Optional

from sdlab.defaults import DEFAULT_JOBS
from sdlab.error.handling import ErrorManager
from sdlab.executors import process
from sdlab.item import CheckItem
from sdlab.stage import Source, Stage

_logger = logging.getLogger(__name__)


class CheckPipeline:
    def __init__(self, max_workers: int = DEFAULT_JOBS):
        """
        :param max_workers: Number of threads evaluating items concurrently, 1 processes them on the calling thread.
            Items are always returned in source order
        """
        if max_workers < 1:
            raise ValueError("At least one worker is needed")
        self._stages: Dict[str, Stage] = {}
        self._error_manager = ErrorManager()
        self._source: Optional[Source] = None
        self._max_workers = max_workers
        self._count = 0
        self._count_lock = threading.Lock()
        self._built = False

    def set_source(self, source: Source) -> CheckPipeline:
        """
        Set the source of the pipeline: a subclass of :class:`.stage.Source`
        """
        self._source = source
        return self

    def set_error_manager(self, error_manager: ErrorManager) -> CheckPipeline:
        """
        Set the error manager for handling errors from each stage item processing
        """
        self._error_manager = error_manager
        return self

    def append_stage(self, name: str, stage: Stage) -> CheckPipeline:
        """
        Append a stage to the pipeline just after the last one appended

        :param name: Name for identify the stage in the pipeline, it is also set in the stage and it must be unique in the pipeline
        :raises ValueError: When the name is already used
        """
        if name in self._stages:
            raise ValueError(f"The stage name {name} is already used in this pipeline")
        stage.set_name(name)
        stage.on_start()
        self._stages[name] = stage
        self._built = False
        return self

    def get_stage(self, name: str) -> Stage:
        """
        Get a stage instance by its name
        """
        return self._stages.get(name)

    def build(self) -> CheckPipeline:
        """
        Pipeline builder method
        """
        if not any(self._stages):
            raise ValueError("Must append at least a stage")
        _logger.debug(f"Building the pipeline on stages: {self._log_stages()}")
        self._error_manager.on_start()
        self._built = True
        return self

    def process(self, item: CheckItem) -> CheckItem:
        """
        Process a single item synchronously through all the stages
        """
        for stage in self._stages.values():
            item = process(stage, item, self._error_manager)
        with self._count_lock:
            self._count += 1
        return item

    def _pop_all(self) -> List[CheckItem]:
        items = []
        while not self._source.is_stopped:
            item = self._source.pop()
            if item is not None:
                items.append(item)
        return items

    def run(self) -> Generator[CheckItem, None, None]:
        """
        Run the stages on all the items of the source

        :return: Iterator over processed items, in the order the source generated them
        :raises ValueError: When a source has not been set or the pipeline has not been built
        """
        if self._source is None:
            raise ValueError("Set the source of check items for this pipeline")
        if not self._built:
            raise ValueError("Build the pipeline before running it")
        items = self._pop_all()
        _logger.debug(f"Running {len(items)} items on stages: {self._log_stages()}")
        if self._max_workers == 1:
            for item in items:
                yield self.process(item)
            return
        with ThreadPoolExecutor(max_workers=self._max_workers) as executor:
            yield from executor.map(self.process, items)

    @property
    def count(self) -> int:
        """
        Get the number of items processed by all executed runs, also for items which have failed
        """
        return self._count

    def _log_stages(self) -> str:
        return ", ".join(self._stages.keys())
