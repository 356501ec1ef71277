"""
Time integration of the systems on flat state vectors, with energy and conservation diagnostics
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Union

import numpy as np
from scipy.optimize import NoConvergence, newton_krylov

from sdlab.defaults import NEWTON_MAX_ITER, NEWTON_TOL, TRACE_FILE
from sdlab.error.exceptions import ConfigError, ConvergenceError, DensityError, NonFiniteError, SolverError
from sdlab.helpers import write_snapshot, write_trace
from sdlab.systems import EnergyTrace, HamiltonianSystem, State, SystemSpec, TelegrapherSystem, build_system

_logger = logging.getLogger(__name__)

Rhs = Callable[[np.ndarray], np.ndarray]
Stepper = Callable[..., np.ndarray]


@dataclass(frozen=True)
class IntegratorConfig:
    """
    :param method: Either "rk4" or "implicit_midpoint"
    :param snapshot_every: Write snapshots every this many steps, 0 disables them
    """

    method: str = "implicit_midpoint"
    dt: float = 0.01
    steps: int = 100
    newton_tol: float = NEWTON_TOL
    newton_max_iter: int = NEWTON_MAX_ITER
    snapshot_every: int = 0

    def __post_init__(self):
        if self.method not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {', '.join(INTEGRATORS)}, got {self.method!r}")
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (isinstance(self.steps, int) and self.steps >= 1):
            raise ConfigError(f"steps must be a positive integer, got {self.steps}")
        if not self.newton_tol > 0:
            raise ConfigError(f"newton_tol must be positive, got {self.newton_tol}")
        if not (isinstance(self.newton_max_iter, int) and self.newton_max_iter >= 1):
            raise ConfigError(f"newton_max_iter must be a positive integer, got {self.newton_max_iter}")
        if not (isinstance(self.snapshot_every, int) and self.snapshot_every >= 0):
            raise ConfigError(f"snapshot_every must be a non negative integer, got {self.snapshot_every}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> IntegratorConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"integrator: unknown fields {', '.join(sorted(unknown))}")
        return cls(**data)


def _check_finite(values: np.ndarray, what: str, step_index: Optional[int]):
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"Non finite values in {what} at step {step_index}", step_index)


def rk4_step(x: np.ndarray, rhs: Rhs, dt: float, step_index: Optional[int] = None) -> np.ndarray:
    """
    Classical four stage Runge-Kutta step

    :raises NonFiniteError: When a stage or the result is not finite
    """
    k1 = rhs(x)
    _check_finite(k1, "the first RK4 stage", step_index)
    k2 = rhs(x + 0.5 * dt * k1)
    _check_finite(k2, "the second RK4 stage", step_index)
    k3 = rhs(x + 0.5 * dt * k2)
    _check_finite(k3, "the third RK4 stage", step_index)
    k4 = rhs(x + dt * k3)
    _check_finite(k4, "the fourth RK4 stage", step_index)
    result = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(result, "the RK4 update", step_index)
    return result


def implicit_midpoint_step(
    x: np.ndarray,
    rhs: Rhs,
    dt: float,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    step_index: Optional[int] = None,
) -> np.ndarray:
    """
    Implicit midpoint step, solving y = x + dt f((x + y) / 2) by fixed-point iteration
    and falling back to Newton-Krylov when the iteration does not settle

    :param tol: Tolerance on the iteration update, relative to max(1, max |x|)
    :raises ConvergenceError: When neither solver reaches the tolerance, with the final residual
    :raises NonFiniteError: When an iterate is not finite
    """
    scale = tol * max(1.0, float(np.max(np.abs(x))) if x.size else 0.0)
    y = x + dt * rhs(x)
    _check_finite(y, "the midpoint predictor", step_index)
    for iteration in range(max_iter):
        following = x + dt * rhs(0.5 * (x + y))
        _check_finite(following, "a midpoint iterate", step_index)
        update = float(np.max(np.abs(following - y)))
        y = following
        if update <= scale:
            _logger.debug(f"Midpoint step {step_index} converged in {iteration + 1} iterations, update {update:.3e}")
            return y
    _logger.debug(f"Midpoint fixed-point iteration stalled at step {step_index}, trying Newton-Krylov")

    def residual(candidate: np.ndarray) -> np.ndarray:
        return candidate - x - dt * rhs(0.5 * (x + candidate))

    try:
        y = newton_krylov(residual, y, f_tol=scale, maxiter=max_iter)
    except (NoConvergence, ValueError, ArithmeticError) as e:
        candidate = e.args[0] if isinstance(e, NoConvergence) and e.args else y
        final = float(np.max(np.abs(residual(np.asarray(candidate)))))
        raise ConvergenceError(
            f"Implicit midpoint did not converge at step {step_index}, residual {final:.3e}", final
        ).with_exception(e)
    _check_finite(y, "the Newton-Krylov solution", step_index)
    return y


INTEGRATORS: Dict[str, Stepper] = {"rk4": rk4_step, "implicit_midpoint": implicit_midpoint_step}


def make_step(cfg: IntegratorConfig) -> Callable[[np.ndarray, Rhs, int], np.ndarray]:
    """
    The step function of a config, as step(x, rhs, step_index)
    """
    if cfg.method == "rk4":
        return lambda x, rhs, index: rk4_step(x, rhs, cfg.dt, index)
    return lambda x, rhs, index: implicit_midpoint_step(x, rhs, cfg.dt, cfg.newton_tol, cfg.newton_max_iter, index)


@dataclass
class SimulationResult:
    trace: EnergyTrace
    snapshots: List[Path] = field(default_factory=list)
    final_state: Optional[State] = None


def integrate_system(
    system: HamiltonianSystem,
    state: State,
    cfg: IntegratorConfig,
    out_dir: Optional[Union[str, Path]] = None,
) -> SimulationResult:
    """
    Integrate a system from a state, recording the trace at every step and snapshots at the configured cadence

    :raises SolverError: When a step fails or leaves the state space, annotated with the time of the step
    """
    step = make_step(cfg)
    trace = EnergyTrace()
    snapshots: List[Path] = []
    x = system.pack(state)
    trace.record(0.0, system.hamiltonian(state), system.conserved(state), 0)
    if out_dir is not None and cfg.snapshot_every:
        snapshots.extend(write_snapshot(out_dir, 0, system.fields(state)))
    for index in range(1, cfg.steps + 1):
        t = index * cfg.dt
        try:
            x = step(x, system.rhs, index)
            state = system.unpack(x)
        except SolverError as e:
            raise e.at_time(t)
        except DensityError as e:
            raise SolverError(f"Step {index} left the state space: {e}").at_time(t).with_exception(e)
        trace.record(t, system.hamiltonian(state), system.conserved(state), index)
        if out_dir is not None and cfg.snapshot_every and index % cfg.snapshot_every == 0:
            snapshots.extend(write_snapshot(out_dir, index, system.fields(state)))
        _logger.debug(f"{system} step {index}, t={t:.6g}, drift {trace.final_drift:.3e}")
    return SimulationResult(trace, snapshots, state)


def run_simulation(
    spec: SystemSpec, cfg: IntegratorConfig, out_dir: Optional[Union[str, Path]] = None
) -> SimulationResult:
    """
    Build the system of a spec, integrate it from its initial condition and, given an output directory,
    write the energy trace CSV and the snapshots there
    """
    system = build_system(spec)
    state = system.initial_state(spec.initial.seed, spec.initial.amplitude, spec.initial.kind)
    _logger.info(f"Simulating {system} with {cfg.method}, dt={cfg.dt}, {cfg.steps} steps")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    result = integrate_system(system, state, cfg, out_dir)
    if out_dir is not None:
        write_trace(Path(out_dir) / TRACE_FILE, result.trace)
    _logger.info(f"Simulation of {system} done, final drift {result.trace.final_drift:.3e}")
    return result


def telegrapher_phase_velocity(
    system: TelegrapherSystem, cfg: IntegratorConfig, amplitude: float = 1.0
) -> float:
    """
    Estimate the wave speed of a telegrapher line by integrating a right-traveling fundamental mode
    and reading the phase shift of the voltage's first Fourier coefficient.
    The horizon steps * dt must keep the phase shift below one period
    """
    result = integrate_system(system, system.traveling_wave(amplitude), cfg)
    coefficient = np.fft.fft(system.voltage(result.final_state))[1]
    horizon = cfg.steps * cfg.dt
    return ((-np.angle(coefficient)) % (2 * math.pi)) / horizon
