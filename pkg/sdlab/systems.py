"""
Concrete Hamiltonian systems wired to their reduced structure maps.

Gauge-reduced systems (telegrapher, string, Maxwell) evolve by ẋ = [♯](δH) with the composed reduced map,
the fluid evolves by ẋ = -[♯](δH) with the velocity representation map.
Every system flattens its state into a single vector for the time integrators.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple, Type, Union

import numpy as np

from sdlab.defaults import DEFAULT_SEED, FLUID_GAMMA, FLUID_GAS_CONSTANT, TRACE_HEADER
from sdlab.error.exceptions import ConfigError, DegreeError, NonFiniteError
from sdlab.gauge_reduction import (
    ReducedCotangent,
    ReducedState,
    ReducedTangent,
    reduced_duality,
    reduced_sharp,
    reduced_sharp_composed,
)
from sdlab.grid_forms import (
    Form,
    Grid,
    centered_difference,
    exterior_derivative,
    hodge,
    integrate,
    interior_product,
    l2_inner,
    random_form,
    sharp,
    wedge,
)
from sdlab.lie_poisson_fluid import (
    FluidCotangent,
    FluidState,
    FluidTangent,
    density,
    random_density,
    v_duality,
    velocity_sharp,
)

_logger = logging.getLogger(__name__)

State = Union[ReducedState, FluidState]
Tangent = Union[ReducedTangent, FluidTangent]
Efforts = Union[ReducedCotangent, FluidCotangent]

INITIAL_KINDS = ("random", "mode")


class SystemEvaluation(NamedTuple):
    hamiltonian: float
    efforts: Efforts
    evolution: Tangent


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "random"
    amplitude: float = 1.0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}, got {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ConfigError("initial.amplitude must be finite")


class HamiltonianSystem(ABC):
    """
    Base of the concrete systems: a Hamiltonian, its variational derivatives (efforts) and the structure map
    turning efforts into the evolution, plus the flat vector view used by the integrators
    """

    name: str = ""
    dimension: int = 0
    degree: Optional[int] = None
    defaults: Mapping[str, float] = {}

    def __init__(self, grid: Grid, **params: float):
        if grid.n != self.dimension:
            raise ConfigError(
                f"grid.sizes: the {self.name} system needs a {self.dimension}-dimensional grid, got {grid.n}"
            )
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ConfigError(f"params: unknown parameters {', '.join(sorted(unknown))} for the {self.name} system")
        self.grid = grid
        try:
            self.params = {**self.defaults, **{k: float(v) for k, v in params.items()}}
        except (TypeError, ValueError) as e:
            raise ConfigError(f"params: values must be numbers ({e})") from e
        self._validate_params()

    def _validate_params(self):
        for name, value in self.params.items():
            if not value > 0:
                raise ConfigError(f"params.{name} must be positive, got {value}")

    def __str__(self) -> str:
        return f"System {self.name} on {self.grid.sizes}"

    @abstractmethod
    def hamiltonian(self, state: State) -> float:
        pass

    @abstractmethod
    def efforts(self, state: State) -> Efforts:
        """
        Variational derivatives of the Hamiltonian, in the slots of the structure map
        """
        pass

    @abstractmethod
    def evolution(self, state: State) -> Tangent:
        pass

    @abstractmethod
    def conserved(self, state: State) -> float:
        """
        The conserved quantity reported in energy traces, besides the energy itself
        """
        pass

    @abstractmethod
    def initial_state(self, seed: int = DEFAULT_SEED, amplitude: float = 1.0, kind: str = "random") -> State:
        pass

    @abstractmethod
    def fields(self, state: State) -> Dict[str, Form]:
        """
        Named forms written in snapshots
        """
        pass

    @abstractmethod
    def pair(self, efforts: Efforts, rates: Tangent) -> float:
        """
        Duality pairing of efforts and rates
        """
        pass

    @abstractmethod
    def _forms(self, value: Union[State, Tangent]) -> Tuple[Form, Form]:
        pass

    @abstractmethod
    def _state(self, first: Form, second: Form) -> State:
        pass

    @abstractmethod
    def _tangent(self, first: Form, second: Form) -> Tangent:
        pass

    def evaluate(self, state: State) -> SystemEvaluation:
        return SystemEvaluation(self.hamiltonian(state), self.efforts(state), self.evolution(state))

    def pack(self, value: Union[State, Tangent]) -> np.ndarray:
        """
        Flatten a state, or a rate, into a single vector
        """
        first, second = self._forms(value)
        return np.concatenate([first.components.ravel(), second.components.ravel()])

    def _split(self, vector: np.ndarray, template: State) -> Tuple[Form, Form]:
        first, second = self._forms(template)
        size = first.components.size
        return (
            Form(self.grid, first.degree, vector[:size].reshape(first.components.shape)),
            Form(self.grid, second.degree, vector[size:].reshape(second.components.shape)),
        )

    def unpack(self, vector: np.ndarray) -> State:
        return self._state(*self._split(vector, self._template))

    def unpack_tangent(self, vector: np.ndarray) -> Tangent:
        return self._tangent(*self._split(vector, self._template))

    def random_direction(self, rng: np.random.Generator) -> Tangent:
        """
        A band-limited random rate, used as perturbation direction
        """
        first, second = self._degrees
        return self._tangent(random_form(self.grid, first, rng), random_form(self.grid, second, rng))

    @property
    def _template(self) -> State:
        first, second = self._degrees
        return self._state(Form.zeros(self.grid, first), self._zero_second(second))

    @property
    @abstractmethod
    def _degrees(self) -> Tuple[int, int]:
        pass

    def _zero_second(self, degree: int) -> Form:
        return Form.zeros(self.grid, degree)

    def rhs(self, vector: np.ndarray) -> np.ndarray:
        """
        Right-hand side of ẋ = f(x) on flat vectors
        """
        return self.pack(self.evolution(self.unpack(vector)))

    def energy_rate(self, state: State) -> float:
        """
        Semi-discrete energy rate ⟨δH, ẋ⟩
        """
        return self.pair(self.efforts(state), self.evolution(state))

    def effort_gap(self, state: State, direction: Tangent, step: float) -> float:
        """
        |⟨δH, h⟩ - (H(x + εh) - H(x - εh)) / 2ε| along a perturbation h given as a rate
        """
        x, h = self.pack(state), self.pack(direction)
        forward = self.hamiltonian(self.unpack(x + step * h))
        backward = self.hamiltonian(self.unpack(x - step * h))
        derivative = self.pair(self.efforts(state), self.unpack_tangent(h))
        return abs(derivative - (forward - backward) / (2.0 * step))


class LineSystem(HamiltonianSystem):
    """
    One-dimensional wave system on the reduced phase space of 0-forms: H = ½∫(a ρ̄ ∧ ∗ρ̄ + b π̄ ∧ ∗π̄)
    """

    dimension = 1
    degree = 0
    field_names: Tuple[str, str] = ("rho_bar", "pi_bar")

    @property
    def coefficients(self) -> Tuple[float, float]:
        raise NotImplementedError

    @property
    def _degrees(self) -> Tuple[int, int]:
        return 1, 1

    def hamiltonian(self, state: ReducedState) -> float:
        a, b = self.coefficients
        return 0.5 * (a * l2_inner(state.rho_bar, state.rho_bar) + b * l2_inner(state.pi_bar, state.pi_bar))

    def efforts(self, state: ReducedState) -> ReducedCotangent:
        a, b = self.coefficients
        return ReducedCotangent(hodge(state.rho_bar) * a, hodge(state.pi_bar) * b)

    def evolution(self, state: ReducedState) -> ReducedTangent:
        return reduced_sharp_composed(self.efforts(state))

    def pair(self, efforts: ReducedCotangent, rates: ReducedTangent) -> float:
        return reduced_duality(efforts, rates)

    def fields(self, state: ReducedState) -> Dict[str, Form]:
        return dict(zip(self.field_names, (state.rho_bar, state.pi_bar)))

    def _forms(self, value):
        if isinstance(value, ReducedTangent):
            return value.rho_bar_dot, value.pi_bar_dot
        return value.rho_bar, value.pi_bar

    def _state(self, first: Form, second: Form) -> ReducedState:
        return ReducedState(0, first, second)

    def _tangent(self, first: Form, second: Form) -> ReducedTangent:
        return ReducedTangent(first, second)


class TelegrapherSystem(LineSystem):
    """
    Lossless transmission line with inductance L and capacitance C per unit length.
    The state is the charge q̄ and the flux π̄ = -L I dx, the voltage is V = ∗q̄ / C
    """

    name = "telegrapher"
    defaults = {"L": 1.0, "C": 1.0}
    field_names = ("q_bar", "pi_bar")

    @property
    def coefficients(self) -> Tuple[float, float]:
        return 1.0 / self.params["C"], 1.0 / self.params["L"]

    @property
    def wave_speed(self) -> float:
        return 1.0 / math.sqrt(self.params["L"] * self.params["C"])

    @property
    def impedance(self) -> float:
        return math.sqrt(self.params["L"] / self.params["C"])

    def voltage(self, state: ReducedState) -> np.ndarray:
        return hodge(state.rho_bar).values / self.params["C"]

    def current(self, state: ReducedState) -> np.ndarray:
        return -hodge(state.pi_bar).values / self.params["L"]

    def from_line_values(self, voltage: np.ndarray, current: np.ndarray) -> ReducedState:
        """
        State with the given voltage and current samples
        """
        scale = self.grid.volume_scale
        q_bar = Form(self.grid, 1, (self.params["C"] * np.asarray(voltage) * scale)[None])
        pi_bar = Form(self.grid, 1, (-self.params["L"] * np.asarray(current) * scale)[None])
        return ReducedState(0, q_bar, pi_bar)

    def traveling_wave(self, amplitude: float = 1.0, mode: int = 1) -> ReducedState:
        """
        Right-traveling wave V = A cos(mx), I = V / Z
        """
        (x,) = self.grid.mesh()
        voltage = amplitude * np.cos(mode * x)
        return self.from_line_values(voltage, voltage / self.impedance)

    def pde_rates(self, state: ReducedState) -> Tuple[np.ndarray, np.ndarray]:
        """
        (V_t, I_t) from C V_t + I_x = 0 and L I_t + V_x = 0 discretized directly by centered differences
        """
        h = self.grid.spacings[0]
        voltage, current = self.voltage(state), self.current(state)
        voltage_rate = -centered_difference(current, 0, h) / self.params["C"]
        return voltage_rate, -centered_difference(voltage, 0, h) / self.params["L"]

    def initial_state(self, seed: int = DEFAULT_SEED, amplitude: float = 1.0, kind: str = "random") -> ReducedState:
        if kind == "mode":
            return self.traveling_wave(amplitude)
        rng = np.random.default_rng(seed)
        return ReducedState(0, random_form(self.grid, 1, rng) * amplitude, random_form(self.grid, 1, rng) * amplitude)

    def conserved(self, state: ReducedState) -> float:
        """
        Total charge ∫ q̄
        """
        return integrate(state.rho_bar)


class StringSystem(LineSystem):
    """
    Vibrating string with tension T_s and mass density μ_s. The state is the strain ε̄ = du and the momentum π̄
    """

    name = "string"
    defaults = {"tension": 1.0, "mass_density": 1.0}
    field_names = ("eps_bar", "pi_bar")

    @property
    def coefficients(self) -> Tuple[float, float]:
        return self.params["tension"], 1.0 / self.params["mass_density"]

    @property
    def wave_speed(self) -> float:
        return math.sqrt(self.params["tension"] / self.params["mass_density"])

    def from_displacement(self, u: np.ndarray, velocity: np.ndarray) -> ReducedState:
        """
        State of displacement u and velocity u_t
        """
        eps_bar = exterior_derivative(Form.scalar(self.grid, u))
        pi_bar = Form(self.grid, 1, (self.params["mass_density"] * np.asarray(velocity) * self.grid.volume_scale)[None])
        return ReducedState(0, eps_bar, pi_bar)

    def wave_rates(self, state: ReducedState) -> Tuple[np.ndarray, np.ndarray]:
        """
        (ε_t, π_t) of the wave equation μ_s u_tt = T_s u_xx with u_t = π / μ_s, discretized directly
        """
        h = self.grid.spacings[0]
        strain = hodge(state.rho_bar).values
        velocity = hodge(state.pi_bar).values / self.params["mass_density"]
        return centered_difference(velocity, 0, h), self.params["tension"] * centered_difference(strain, 0, h)

    def initial_state(self, seed: int = DEFAULT_SEED, amplitude: float = 1.0, kind: str = "random") -> ReducedState:
        if kind == "mode":
            (x,) = self.grid.mesh()
            return self.from_displacement(amplitude * np.sin(x), np.zeros(self.grid.shape))
        rng = np.random.default_rng(seed)
        u = random_form(self.grid, 0, rng)
        return ReducedState(0, exterior_derivative(u) * amplitude, random_form(self.grid, 1, rng) * amplitude)

    def conserved(self, state: ReducedState) -> float:
        """
        Total momentum ∫ π̄
        """
        return integrate(state.pi_bar)


def maxwell_state(b: Form, d: Form) -> ReducedState:
    """
    Reduced Maxwell state (B, Π) with Π = -D
    """
    return ReducedState(1, b, -d)


def _check_maxwell(b: Form, d: Form):
    b.grid.check_same(d.grid)
    if b.grid.n != 3 or b.degree != 2 or d.degree != 2:
        raise DegreeError("Maxwell fields B and D are 2-forms on a 3-dimensional grid")


def maxwell_hamiltonian(b: Form, d: Form) -> float:
    """
    H = ½∫(D ∧ ∗D + B ∧ ∗B)
    """
    _check_maxwell(b, d)
    return 0.5 * (l2_inner(d, d) + l2_inner(b, b))


def maxwell_efforts(b: Form, d: Form) -> ReducedCotangent:
    """
    Efforts (∗B, -∗D), the derivatives of H with respect to B and Π = -D
    """
    _check_maxwell(b, d)
    return ReducedCotangent(hodge(b), -hodge(d))


def maxwell_evolution(state: ReducedState) -> ReducedTangent:
    """
    Rates (Ḃ, Π̇) = (-d∗D, -d∗B) of the reduced map for n = 3, k = 1
    """
    b, d = state.rho_bar, -state.pi_bar
    return reduced_sharp(maxwell_efforts(b, d))


class MaxwellSystem(HamiltonianSystem):
    """
    Electromagnetism in vacuum, the state being the magnetic field B = dA and Π = -D
    """

    name = "maxwell"
    dimension = 3
    degree = 1
    defaults: Mapping[str, float] = {}

    @property
    def _degrees(self) -> Tuple[int, int]:
        return 2, 2

    def hamiltonian(self, state: ReducedState) -> float:
        return maxwell_hamiltonian(state.rho_bar, -state.pi_bar)

    def efforts(self, state: ReducedState) -> ReducedCotangent:
        return maxwell_efforts(state.rho_bar, -state.pi_bar)

    def evolution(self, state: ReducedState) -> ReducedTangent:
        return maxwell_evolution(state)

    def field_rates(self, state: ReducedState) -> Tuple[Form, Form]:
        """
        (Ḃ, Ḋ) with Ḋ = -Π̇
        """
        rates = self.evolution(state)
        return rates.rho_bar_dot, -rates.pi_bar_dot

    def pair(self, efforts: ReducedCotangent, rates: ReducedTangent) -> float:
        return reduced_duality(efforts, rates)

    def conserved(self, state: ReducedState) -> float:
        """
        Gauss law norm ½∫ dD ∧ ∗dD
        """
        divergence = exterior_derivative(state.pi_bar)
        return 0.5 * l2_inner(divergence, divergence)

    def initial_state(self, seed: int = DEFAULT_SEED, amplitude: float = 1.0, kind: str = "random") -> ReducedState:
        if kind == "mode":
            _, _, x3 = self.grid.mesh()
            potential = Form.basis(self.grid, (0,), amplitude * np.sin(x3))
            d = Form.basis(self.grid, (1, 2), amplitude * np.sin(x3))
            return maxwell_state(exterior_derivative(potential), d)
        rng = np.random.default_rng(seed)
        potential = random_form(self.grid, 1, rng)
        return maxwell_state(exterior_derivative(potential) * amplitude, random_form(self.grid, 2, rng) * amplitude)

    def fields(self, state: ReducedState) -> Dict[str, Form]:
        return {"B": state.rho_bar, "D": -state.pi_bar}

    def _forms(self, value):
        if isinstance(value, ReducedTangent):
            return value.rho_bar_dot, value.pi_bar_dot
        return value.rho_bar, value.pi_bar

    def _state(self, first: Form, second: Form) -> ReducedState:
        return ReducedState(1, first, second)

    def _tangent(self, first: Form, second: Form) -> ReducedTangent:
        return ReducedTangent(first, second)


class FluidSystem(HamiltonianSystem):
    """
    Compressible isentropic fluid with internal energy U(ρ̃) = K_g ρ̃^(γ-1) / (γ-1)
    """

    name = "fluid"
    dimension = 3
    defaults = {"gamma": FLUID_GAMMA, "gas_constant": FLUID_GAS_CONSTANT}

    def _validate_params(self):
        if not self.params["gamma"] > 1:
            raise ConfigError(f"params.gamma must be greater than 1, got {self.params['gamma']}")
        if not self.params["gas_constant"] > 0:
            raise ConfigError(f"params.gas_constant must be positive, got {self.params['gas_constant']}")

    @property
    def _degrees(self) -> Tuple[int, int]:
        return 1, 3

    def _zero_second(self, degree: int) -> Form:
        # unit density, only used as a template for shapes
        return Form.scalar(self.grid, self.grid.volume_scale, degree=degree)

    def _kinetic(self, theta: Form) -> Form:
        """
        ½|θ|² as a 0-form
        """
        return interior_product(sharp(theta), theta) * 0.5

    def internal_energy(self, scalar: np.ndarray) -> np.ndarray:
        gamma = self.params["gamma"]
        return self.params["gas_constant"] * scalar ** (gamma - 1.0) / (gamma - 1.0)

    def enthalpy(self, scalar: np.ndarray) -> np.ndarray:
        """
        d(ρ̃U)/dρ̃
        """
        gamma = self.params["gamma"]
        return self.params["gas_constant"] * gamma * scalar ** (gamma - 1.0) / (gamma - 1.0)

    def hamiltonian(self, state: FluidState) -> float:
        scalar = density(state.rho)
        energy = self._kinetic(state.theta) + Form.scalar(self.grid, self.internal_energy(scalar))
        return integrate(wedge(energy, state.rho))

    def efforts(self, state: FluidState) -> FluidCotangent:
        """
        Mass flux i_{θ♯} ρ and Bernoulli function ½|θ|² + d(ρ̃U)/dρ̃
        """
        scalar = density(state.rho)
        flux = interior_product(sharp(state.theta), state.rho)
        bernoulli = self._kinetic(state.theta) + Form.scalar(self.grid, self.enthalpy(scalar))
        return FluidCotangent(flux, bernoulli)

    def evolution(self, state: FluidState) -> FluidTangent:
        return -velocity_sharp(self.efforts(state), state)

    def pair(self, efforts: FluidCotangent, rates: FluidTangent) -> float:
        return v_duality(efforts, rates)

    def conserved(self, state: FluidState) -> float:
        """
        Total mass ∫ ρ
        """
        return integrate(state.rho)

    def initial_state(self, seed: int = DEFAULT_SEED, amplitude: float = 1.0, kind: str = "random") -> FluidState:
        if kind == "mode":
            x1, _, _ = self.grid.mesh()
            theta = Form.basis(self.grid, (0,), amplitude * np.sin(x1))
            rho = Form.scalar(self.grid, (1.0 + 0.1 * np.cos(x1)) * self.grid.volume_scale, degree=3)
            return FluidState(theta, rho)
        rng = np.random.default_rng(seed)
        return FluidState(random_form(self.grid, 1, rng) * amplitude, random_density(self.grid, rng, 0.2))

    def fields(self, state: FluidState) -> Dict[str, Form]:
        return {"theta": state.theta, "rho": state.rho}

    def _forms(self, value):
        if isinstance(value, FluidTangent):
            return value.theta_dot, value.rho_dot
        return value.theta, value.rho

    def _state(self, first: Form, second: Form) -> FluidState:
        return FluidState(first, second)

    def _tangent(self, first: Form, second: Form) -> FluidTangent:
        return FluidTangent(first, second)


def telegrapher_system(q_bar: Form, pi_bar: Form, L: float = 1.0, C: float = 1.0) -> SystemEvaluation:
    return TelegrapherSystem(q_bar.grid, L=L, C=C).evaluate(ReducedState(0, q_bar, pi_bar))


def string_system(eps_bar: Form, pi_bar: Form, tension: float = 1.0, mass_density: float = 1.0) -> SystemEvaluation:
    return StringSystem(eps_bar.grid, tension=tension, mass_density=mass_density).evaluate(
        ReducedState(0, eps_bar, pi_bar)
    )


def fluid_system(
    s: FluidState, gas_constant: float = FLUID_GAS_CONSTANT, gamma: float = FLUID_GAMMA
) -> SystemEvaluation:
    return FluidSystem(s.grid, gas_constant=gas_constant, gamma=gamma).evaluate(s)


SYSTEMS: Dict[str, Type[HamiltonianSystem]] = {
    system.name: system for system in (TelegrapherSystem, StringSystem, MaxwellSystem, FluidSystem)
}


def _require(data: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or 'config'} must be an object")
    if key not in data:
        raise ConfigError(f"Missing field {path + '.' if path else ''}{key}")
    return data[key]


def grid_from_config(data: Mapping[str, Any]) -> Grid:
    """
    Grid from {"sizes": [...], "length": float or [...] | "spacings": [...], "metric": [...]}
    """
    sizes = _require(data, "sizes", "grid")
    if not isinstance(sizes, list) or not sizes:
        raise ConfigError("grid.sizes must be a non empty list of integers")
    try:
        if "spacings" in data:
            return Grid(tuple(sizes), tuple(data["spacings"]), tuple(data.get("metric") or (1.0,) * len(sizes)))
        return Grid.periodic(sizes, data.get("length", 2 * math.pi), data.get("metric"))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"grid: {e}") from e


@dataclass(frozen=True)
class SystemSpec:
    """
    Which system to simulate, on which grid, with which parameters and initial condition
    """

    name: str
    grid: Grid
    params: Dict[str, float] = field(default_factory=dict)
    initial: InitialCondition = field(default_factory=InitialCondition)

    def __post_init__(self):
        if self.name not in SYSTEMS:
            raise ConfigError(f"system must be one of {', '.join(SYSTEMS)}, got {self.name!r}")

    @property
    def n(self) -> int:
        return SYSTEMS[self.name].dimension

    @property
    def k(self) -> Optional[int]:
        return SYSTEMS[self.name].degree

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SystemSpec:
        """
        :raises ConfigError: When a field is missing or invalid, naming the field
        """
        name = _require(data, "system", "")
        grid = grid_from_config(_require(data, "grid", ""))
        params = data.get("params") or {}
        if not isinstance(params, Mapping):
            raise ConfigError("params must be an object")
        initial = data.get("initial") or {}
        if not isinstance(initial, Mapping):
            raise ConfigError("initial must be an object")
        try:
            condition = InitialCondition(
                kind=initial.get("kind", "random"),
                amplitude=float(initial.get("amplitude", 1.0)),
                seed=int(initial.get("seed", DEFAULT_SEED)),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"initial: {e}") from e
        return cls(name, grid, dict(params), condition)

    @classmethod
    def from_json(cls, text: str) -> SystemSpec:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed config at line {e.lineno}, column {e.colno}: {e.msg}") from e
        return cls.from_dict(data)

    def with_overrides(
        self, sizes: Optional[Tuple[int, ...]] = None, seed: Optional[int] = None
    ) -> SystemSpec:
        grid = self.grid
        if sizes is not None:
            if len(sizes) != grid.n:
                raise ConfigError(f"grid.sizes: override {sizes} does not match dimension {grid.n}")
            lengths = grid.lengths
            grid = Grid(tuple(sizes), tuple(l / s for l, s in zip(lengths, sizes)), grid.metric)
        initial = self.initial
        if seed is not None:
            initial = InitialCondition(initial.kind, initial.amplitude, seed)
        return SystemSpec(self.name, grid, self.params, initial)


def build_system(spec: SystemSpec) -> HamiltonianSystem:
    """
    Instantiate the system a spec names
    """
    return SYSTEMS[spec.name](spec.grid, **spec.params)


class EnergyTrace:
    """
    Time series of the energy H, the conserved quantity of a system and the relative energy drift
    """

    def __init__(self):
        self._rows: List[Tuple[float, float, float, float]] = []

    def record(self, t: float, hamiltonian: float, conserved: float, step: Optional[int] = None) -> EnergyTrace:
        """
        :raises NonFiniteError: When an entry is not finite
        :raises ValueError: When time does not increase
        """
        if not all(math.isfinite(v) for v in (t, hamiltonian, conserved)):
            raise NonFiniteError(f"Non finite diagnostics at t={t}: H={hamiltonian}, conserved={conserved}", step)
        if self._rows and t <= self._rows[-1][0]:
            raise ValueError(f"Trace times must increase, got {t} after {self._rows[-1][0]}")
        initial = self._rows[0][1] if self._rows else hamiltonian
        drift = (hamiltonian - initial) / abs(initial) if initial != 0 else hamiltonian - initial
        self._rows.append((t, hamiltonian, conserved, drift))
        return self

    @property
    def rows(self) -> List[Tuple[float, float, float, float]]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def final_drift(self) -> float:
        return self._rows[-1][3] if self._rows else 0.0

    @property
    def max_drift(self) -> float:
        return max((abs(row[3]) for row in self._rows), default=0.0)

    @property
    def conserved_drift(self) -> float:
        """
        Largest absolute change of the conserved quantity
        """
        if not self._rows:
            return 0.0
        initial = self._rows[0][2]
        return max(abs(row[2] - initial) for row in self._rows)

    def to_csv(self) -> str:
        """
        CSV text with header t,H,conserved,drift and floats in shortest round-trip form
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in self._rows:
            writer.writerow([repr(float(v)) for v in row])
        return buffer.getvalue()
