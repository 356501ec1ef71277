import filecmp
import math

import numpy as np
import pytest

from sdlab.error.exceptions import ConfigError, ConvergenceError, DensityError, NonFiniteError, SolverError
from sdlab.grid_forms import Grid
from sdlab.helpers import iter_snapshots, read_snapshot
from sdlab.systems import FluidSystem, MaxwellSystem, SystemSpec, TelegrapherSystem
from sdlab.timestep import (
    INTEGRATORS,
    IntegratorConfig,
    implicit_midpoint_step,
    integrate_system,
    make_step,
    rk4_step,
    run_simulation,
    telegrapher_phase_velocity,
)
from tests.utils import MAXWELL_CONFIG


def test_rk4_decay():
    assert rk4_step(np.array([1.0]), lambda x: -x, 0.1)[0] == pytest.approx(0.9048375, abs=1e-13)


def test_midpoint_decay():
    value = implicit_midpoint_step(np.array([1.0]), lambda x: -x, 0.1)[0]
    assert value == pytest.approx(0.95 / 1.05, abs=1e-12)


def test_midpoint_rotation_keeps_norm():
    rotation = np.array([[0.0, -1.0], [1.0, 0.0]])
    x = np.array([1.0, 0.0])
    for index in range(100):
        x = implicit_midpoint_step(x, lambda y: rotation @ y, 0.1, step_index=index)
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-12)


def test_midpoint_convergence_error():
    # the midpoint equation reduces to exp(-y) = 0
    with pytest.raises(ConvergenceError, match="did not converge at step 3") as e:
        implicit_midpoint_step(np.array([0.0]), lambda y: 2.0 * y + np.exp(-2.0 * y), 1.0, max_iter=3, step_index=3)
    assert e.value.residual > 0.0
    assert e.value.get_exception() is not None


def test_non_finite():
    with pytest.raises(NonFiniteError, match="first RK4 stage") as e:
        rk4_step(np.array([1.0]), lambda x: x * np.nan, 0.1, step_index=7)
    assert e.value.step == 7
    with pytest.raises(NonFiniteError):
        implicit_midpoint_step(np.array([1.0]), lambda x: np.full_like(x, np.inf), 0.1)


def test_integrator_config():
    cfg = IntegratorConfig.from_dict({"method": "rk4", "dt": 0.5, "steps": 3})
    assert (cfg.method, cfg.dt, cfg.steps, cfg.snapshot_every) == ("rk4", 0.5, 3, 0)
    assert set(INTEGRATORS) == {"rk4", "implicit_midpoint"}
    stepped = make_step(cfg)(np.array([1.0]), lambda x: -x, 1)
    assert stepped == pytest.approx(rk4_step(np.array([1.0]), lambda x: -x, 0.5))
    with pytest.raises(ConfigError, match="unknown fields order"):
        IntegratorConfig.from_dict({"order": 4})
    with pytest.raises(ConfigError, match="integrator must be one of"):
        IntegratorConfig(method="euler")
    with pytest.raises(ConfigError, match="dt must be positive"):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ConfigError, match="steps"):
        IntegratorConfig(steps=0)
    with pytest.raises(ConfigError, match="snapshot_every"):
        IntegratorConfig(snapshot_every=-1)


def test_telegrapher_energy_drift(line_grid_fx):
    system = TelegrapherSystem(line_grid_fx)
    cfg = IntegratorConfig(method="implicit_midpoint", dt=0.01, steps=200)
    result = integrate_system(system, system.initial_state(seed=1), cfg)
    assert len(result.trace) == 201
    assert result.trace.max_drift <= 1e-10
    assert result.trace.conserved_drift <= 1e-12
    assert result.snapshots == []


def test_maxwell_energy_drift(fluid_grid_fx):
    system = MaxwellSystem(fluid_grid_fx)
    cfg = IntegratorConfig(method="implicit_midpoint", dt=0.05, steps=40)
    result = integrate_system(system, system.initial_state(seed=2), cfg)
    assert result.trace.max_drift <= 1e-9
    assert result.trace.conserved_drift <= 1e-12 * result.trace.rows[0][2]


def test_rk4_energy_drift_is_not_zero(line_grid_fx):
    system = TelegrapherSystem(line_grid_fx)
    cfg = IntegratorConfig(method="rk4", dt=0.01, steps=100)
    result = integrate_system(system, system.initial_state(seed=1), cfg)
    assert 0.0 < result.trace.max_drift < 1e-3


def test_rk4_energy_order(line_grid_fx):
    system = TelegrapherSystem(line_grid_fx, L=1.0, C=4.0)
    state = system.traveling_wave(mode=8)
    initial = system.hamiltonian(state)

    def energy_error(dt, steps):
        result = integrate_system(system, state, IntegratorConfig(method="rk4", dt=dt, steps=steps))
        return abs(system.hamiltonian(result.final_state) - initial)

    coarse, fine = energy_error(0.1, 40), energy_error(0.05, 80)
    assert fine > 0.0
    assert math.log2(coarse / fine) >= 3.8


def test_fluid_collapse(fluid_grid_fx):
    system = FluidSystem(fluid_grid_fx)
    state = system.initial_state(kind="mode")
    message = r"^Step 1 left the state space: Density must be strictly positive"
    with pytest.raises(SolverError, match=message) as excinfo:
        integrate_system(system, state, IntegratorConfig(method="rk4", dt=10.0, steps=1))
    assert excinfo.value.time == 10.0
    assert str(excinfo.value).endswith("(t=10.0)")
    assert isinstance(excinfo.value.get_exception(), DensityError)


def test_fluid_mass(fluid_grid_fx):
    system = FluidSystem(fluid_grid_fx)
    state = system.initial_state(seed=3)
    result = integrate_system(system, state, IntegratorConfig(method="rk4", dt=1e-3, steps=20))
    assert result.trace.conserved_drift / system.conserved(state) <= 1e-12
    assert result.trace.max_drift <= 1e-6


def test_phase_velocity():
    system = TelegrapherSystem(Grid.periodic((64,)), L=1.0, C=4.0)
    cfg = IntegratorConfig(method="implicit_midpoint", dt=0.01, steps=400)
    speed = telegrapher_phase_velocity(system, cfg)
    assert speed == pytest.approx(system.wave_speed, rel=0.02)


def test_run_simulation(tmp_path):
    spec = SystemSpec.from_dict(MAXWELL_CONFIG)
    cfg = IntegratorConfig.from_dict(MAXWELL_CONFIG["integrator"])
    result = run_simulation(spec, cfg, tmp_path / "first")
    lines = (tmp_path / "first" / "energy.csv").read_text().splitlines()
    assert lines[0] == "t,H,conserved,drift"
    assert len(lines) == 22
    assert lines[1].startswith("0.0,")
    assert [path.name for path in iter_snapshots(tmp_path / "first", "B")] == [
        "000000_B.json",
        "000010_B.json",
        "000020_B.json",
    ]
    assert len(result.snapshots) == 6
    final = read_snapshot(tmp_path / "first" / "000020_D.json")
    assert np.array_equal(final.components, -result.final_state.pi_bar.components)

    run_simulation(spec, cfg, tmp_path / "second")
    names = sorted(path.name for path in (tmp_path / "first").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "first", tmp_path / "second", names, shallow=False)
    assert mismatch == [] and errors == []
    assert len(match) == 7


def test_run_simulation_without_output():
    spec = SystemSpec.from_dict(MAXWELL_CONFIG).with_overrides(sizes=(4, 4, 4))
    result = run_simulation(spec, IntegratorConfig(method="rk4", dt=0.01, steps=2, snapshot_every=1))
    assert len(result.trace) == 3
    assert result.snapshots == []
