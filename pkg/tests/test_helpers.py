from pathlib import Path

import numpy as np
import pytest

from sdlab.error.exceptions import ConfigError
from sdlab.helpers import (
    iter_snapshots,
    output_directory,
    read_config_text,
    read_snapshot,
    snapshot_path,
    write_snapshot,
    write_trace,
)
from sdlab.grid_forms import random_form
from sdlab.systems import EnergyTrace


def test_output_directory(monkeypatch, tmp_path):
    monkeypatch.delenv("SDLAB_OUT", raising=False)
    assert output_directory() == Path("sdlab-out")
    monkeypatch.setenv("SDLAB_OUT", str(tmp_path))
    assert output_directory() == tmp_path
    assert output_directory(tmp_path / "explicit") == tmp_path / "explicit"


def test_snapshots(tmp_path, grids_fx, rng_fx):
    fields = {"B": random_form(grids_fx[3], 2, rng_fx), "D": random_form(grids_fx[3], 2, rng_fx)}
    paths = write_snapshot(tmp_path, 40, fields)
    assert [path.name for path in paths] == ["000040_B.json", "000040_D.json"]
    assert snapshot_path(tmp_path, 40, "B") == paths[0]
    write_snapshot(tmp_path, 0, fields)
    (tmp_path / ".000020_B.json").write_text("{}")
    assert [path.name for path in iter_snapshots(tmp_path, "B")] == ["000000_B.json", "000040_B.json"]
    restored = read_snapshot(paths[1])
    assert restored.degree == 2
    assert np.array_equal(restored.components, fields["D"].components)


def test_trace_file(tmp_path):
    trace = EnergyTrace().record(0.0, 1.0, 0.0).record(0.1, 1.0, 0.0)
    path = write_trace(tmp_path / "energy.csv", trace)
    assert path.read_text() == "t,H,conserved,drift\n0.0,1.0,0.0,0.0\n0.1,1.0,0.0,0.0\n"


def test_read_config_text(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"system": "string"}')
    assert read_config_text(path) == '{"system": "string"}'
    with pytest.raises(ConfigError, match="Cannot read config"):
        read_config_text(tmp_path / "missing.json")
