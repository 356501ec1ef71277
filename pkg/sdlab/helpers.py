import json
import os
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Union

from sdlab.defaults import DEFAULT_OUTPUT, OUTPUT_ENV, SNAPSHOT_PATTERN
from sdlab.error.exceptions import ConfigError
from sdlab.grid_forms import Form, form_from_json, form_to_json

PathLike = Union[str, Path]


def output_directory(explicit: Optional[PathLike] = None) -> Path:
    """
    The output directory: an explicit one, otherwise the one in the environment variable SDLAB_OUT,
    otherwise a default relative directory
    """
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def snapshot_path(out_dir: PathLike, step: int, name: str) -> Path:
    return Path(out_dir) / SNAPSHOT_PATTERN.format(step=step, field=name)


def write_snapshot(out_dir: PathLike, step: int, fields: Dict[str, Form]) -> List[Path]:
    """
    Write every named form as a JSON snapshot file of a step

    :return: Paths of the written files, in the order of the fields
    """
    paths = []
    for name, form in fields.items():
        path = snapshot_path(out_dir, step, name)
        with open(path, "w") as f:
            json.dump(form_to_json(form), f)
        paths.append(path)
    return paths


def read_snapshot(path: PathLike) -> Form:
    with open(path) as f:
        return form_from_json(json.load(f))


def iter_snapshots(out_dir: PathLike, name: str) -> Iterator[Path]:
    """
    Snapshot files of a field found in a directory, sorted by step
    """
    for path in sorted(Path(out_dir).glob(f"*_{name}.json")):
        if not path.name.startswith("."):
            yield path


def write_trace(path: PathLike, trace) -> Path:
    """
    Write an :class:`.systems.EnergyTrace` as CSV
    """
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(trace.to_csv())
    return path


def read_config_text(path: PathLike) -> str:
    """
    :raises ConfigError: When the file cannot be read
    """
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e.strerror}") from e
