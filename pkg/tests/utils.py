import json

import numpy as np

from sdlab.error.exceptions import CriticalError, SoftError
from sdlab.grid_forms import Form
from sdlab.item import CheckItem
from sdlab.stage import Source, Stage

SEEDS = (0, 1, 7, 42, 2021)

MAXWELL_CONFIG = {
    "system": "maxwell",
    "grid": {"sizes": [8, 8, 8]},
    "initial": {"kind": "random", "amplitude": 1.0, "seed": 42},
    "integrator": {"method": "implicit_midpoint", "dt": 0.05, "steps": 20, "snapshot_every": 10},
}

TELEGRAPHER_CONFIG = {
    "system": "telegrapher",
    "grid": {"sizes": [32]},
    "params": {"L": 1.0, "C": 4.0},
    "initial": {"kind": "mode", "amplitude": 0.5},
    "integrator": {"method": "implicit_midpoint", "dt": 0.01, "steps": 50},
}


def write_config(path, config) -> str:
    with open(path, "w") as f:
        json.dump(config, f)
    return str(path)


def relative_gap(first: Form, second: Form) -> float:
    return (first - second).max_abs() / max(1.0, first.max_abs(), second.max_abs())


def check_items(count, suite="dec", tolerance=1e-12):
    return [CheckItem(suite, f"property_{i}", tolerance) for i in range(count)]


class ListSource(Source):
    def __init__(self, items):
        self.items = iter(items)

    def pop(self):
        try:
            return next(self.items)
        except StopIteration:
            self.stop()


class FixedResidual(Stage):
    def __init__(self, residual=0.0):
        self._residual = residual

    def process(self, item: CheckItem):
        item.residual = self._residual
        return item


class ScaledResidual(Stage):
    """
    Residual growing with the item position in its name, so that outputs can be matched to inputs
    """

    def process(self, item: CheckItem):
        item.residual = float(item.name.rsplit("_", 1)[1]) * 1e-3
        return item


class ErrorStage(Stage):
    def process(self, item: CheckItem):
        raise SoftError("test check error")


class ExceptionStage(Stage):
    def process(self, item: CheckItem):
        raise np.linalg.LinAlgError("test singular matrix")


class CriticalIOErrorStage(Stage):
    def process(self, item: CheckItem):
        raise CriticalError("test check critical IO error").with_exception(IOError())
