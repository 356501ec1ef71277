"""
Executable property checks of the library, grouped in suites and run through the check pipeline.

Every check draws its randomness from a generator seeded by the run seed and the check id,
so a residual does not depend on which other checks run or on their evaluation order.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from sdlab.canonical_dirac import graph_dimension_ratio, isotropy_residual, phase_duality, random_tangent, skew_residual
from sdlab.defaults import (
    ADJOINT_TOL,
    CHECK_SUITES,
    COMPOSITION_TOL,
    CONVERGENCE_ORDER,
    DEFAULT_JOBS,
    DEFAULT_SEED,
    EFFORT_STEP,
    EFFORT_TOL,
    EXACT_TOL,
    MAXWELL_DRIFT_TOL,
    PHASE_VELOCITY_TOL,
    RK4_DECAY_FACTOR,
    TELEGRAPHER_DRIFT_TOL,
)
from sdlab.error.exceptions import ConfigError, ToleranceError
from sdlab.gauge_reduction import (
    PhasePoint,
    cotangent_quotient,
    gauge_act,
    quotient_project,
    random_reduced_cotangent,
    reduced_duality,
    reduced_duality_magnitude,
    reduced_sharp,
    reduced_sharp_composed,
    sign_table,
    tangent_quotient,
)
from sdlab.grid_forms import (
    Form,
    Grid,
    centered_difference,
    exterior_derivative,
    flat,
    hodge,
    integrate,
    interior_product,
    l2_inner,
    pairing,
    pairing_magnitude,
    random_form,
    random_vector_field,
    sharp,
)
from sdlab.item import CheckItem
from sdlab.lie_poisson_fluid import (
    FluidCotangent,
    FluidTangent,
    MomentumTangent,
    convective_term,
    convergence_order,
    cotangent_phi,
    phi_inverse,
    random_fluid_cotangent,
    random_fluid_state,
    s_duality,
    tangent_phi,
    trigonometric_coadjoint_residual,
    v_duality,
    velocity_sharp,
    velocity_sharp_composed,
)
from sdlab.pipeline import CheckPipeline
from sdlab.stage import Source, Stage
from sdlab.systems import (
    FluidSystem,
    HamiltonianSystem,
    MaxwellSystem,
    StringSystem,
    TelegrapherSystem,
    maxwell_hamiltonian,
)
from sdlab.timestep import (
    IntegratorConfig,
    implicit_midpoint_step,
    integrate_system,
    rk4_step,
    telegrapher_phase_velocity,
)

_logger = logging.getLogger(__name__)

Evaluation = Callable[[np.random.Generator], float]


@dataclass(frozen=True)
class PropertyCheck:
    """
    A named property with its residual function.
    A check passes when its residual is at most the tolerance or, for lower bounds, at least the tolerance
    """

    suite: str
    name: str
    tolerance: float
    evaluate: Evaluation
    lower_bound: bool = False

    @property
    def id(self) -> str:
        return f"{self.suite}.{self.name}"

    def rng(self, seed: int) -> np.random.Generator:
        return np.random.default_rng([seed, zlib.crc32(self.id.encode())])


CHECKS: Dict[str, PropertyCheck] = {}


def check(suite: str, name: str, tolerance: float, lower_bound: bool = False) -> Callable[[Evaluation], Evaluation]:
    """
    Register a residual function as a property check of a suite
    """

    def register(evaluate: Evaluation) -> Evaluation:
        if suite not in CHECK_SUITES:
            raise ValueError(f"Unknown suite {suite}")
        prop = PropertyCheck(suite, name, tolerance, evaluate, lower_bound)
        if prop.id in CHECKS:
            raise ValueError(f"The check {prop.id} is already registered")
        CHECKS[prop.id] = prop
        return evaluate

    return register


def select_checks(suite: Optional[str] = None) -> List[PropertyCheck]:
    """
    Registered checks of a suite, or of all suites for None or "all", sorted by suite then name

    :raises ConfigError: When the suite does not exist
    """
    if suite not in (None, "all") and suite not in CHECK_SUITES:
        raise ConfigError(f"suite must be one of all, {', '.join(CHECK_SUITES)}, got {suite!r}")
    selected = [c for c in CHECKS.values() if suite in (None, "all") or c.suite == suite]
    return sorted(selected, key=lambda c: (c.suite, c.name))


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**31))


def _relative(difference: float, *scales: float) -> float:
    return difference / max(1.0, *scales)


def _ratio(difference: float, scale: float) -> float:
    return difference / max(scale, np.finfo(float).tiny)


DEC_GRIDS = ((64,), (32, 32), (16, 16, 16))
METRICS = {1: (2.0,), 2: (1.0, 3.0), 3: (1.0, 2.0, 0.5)}
REDUCTION_SIZE = 8
FLUID_SIZES = (8, 8, 8)
LINE_SIZES = (64,)


def _derivative_scale(a: Form) -> float:
    return exterior_derivative(a).max_abs() / min(a.grid.spacings)


@check("dec", "d_squared_zero", EXACT_TOL)
def _d_squared_zero(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS:
        grid = Grid.periodic(sizes)
        for k in range(grid.n - 1):
            a = random_form(grid, k, rng)
            twice = exterior_derivative(exterior_derivative(a))
            residual = max(residual, _relative(twice.max_abs(), _derivative_scale(a)))
    return residual


@check("dec", "stokes", EXACT_TOL)
def _stokes(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS:
        grid = Grid.periodic(sizes)
        derivative = exterior_derivative(random_form(grid, grid.n - 1, rng))
        scale = pairing_magnitude(Form.scalar(grid, 1.0), derivative)
        residual = max(residual, _ratio(abs(integrate(derivative)), scale))
    return residual


@check("dec", "adjointness", ADJOINT_TOL)
def _adjointness(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS:
        grid = Grid.periodic(sizes)
        for k in range(grid.n):
            a, b = random_form(grid, k, rng), random_form(grid, grid.n - k - 1, rng)
            da, db = exterior_derivative(a), exterior_derivative(b)
            value = pairing(da, b) + (-1) ** k * pairing(a, db)
            residual = max(residual, _ratio(abs(value), pairing_magnitude(da, b) + pairing_magnitude(a, db)))
    return residual


@check("dec", "hodge_involution", EXACT_TOL)
def _hodge_involution(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS:
        grid = Grid.periodic(sizes, metric=METRICS[len(sizes)])
        for k in range(grid.n + 1):
            a = random_form(grid, k, rng)
            difference = hodge(hodge(a)) - a * (-1) ** (k * (grid.n - k))
            residual = max(residual, _relative(difference.max_abs(), a.max_abs()))
    return residual


@check("dec", "flat_sharp", EXACT_TOL)
def _flat_sharp(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS:
        grid = Grid.periodic(sizes, metric=METRICS[len(sizes)])
        a = random_form(grid, 1, rng)
        residual = max(residual, _relative((flat(sharp(a)) - a).max_abs(), a.max_abs()))
    return residual


@check("dec", "interior_nilpotent", EXACT_TOL)
def _interior_nilpotent(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS[1:]:
        grid = Grid.periodic(sizes)
        field = random_vector_field(grid, rng)
        for k in range(2, grid.n + 1):
            twice = interior_product(field, interior_product(field, random_form(grid, k, rng)))
            residual = max(residual, twice.max_abs())
    return residual


@check("dec", "l2_nonnegative", EXACT_TOL)
def _l2_nonnegative(rng: np.random.Generator) -> float:
    residual = 0.0
    for sizes in DEC_GRIDS:
        grid = Grid.periodic(sizes, metric=METRICS[len(sizes)])
        for k in range(grid.n + 1):
            a = random_form(grid, k, rng)
            residual = max(residual, -l2_inner(a, a))
    return residual


@check("dirac", "isotropy", ADJOINT_TOL)
def _isotropy(rng: np.random.Generator) -> float:
    return isotropy_residual(samples=100, seed=_seed(rng))


@check("dirac", "skew_symmetry", ADJOINT_TOL)
def _skew_symmetry(rng: np.random.Generator) -> float:
    return skew_residual(samples=20, seed=_seed(rng))


@check("dirac", "graph_dimension", EXACT_TOL)
def _graph_dimension(rng: np.random.Generator) -> float:
    return abs(graph_dimension_ratio() - 0.5)


def _reduction_degrees() -> Iterator[Tuple[Grid, int]]:
    for n in range(1, 4):
        grid = Grid.periodic((REDUCTION_SIZE,) * n)
        for k in range(n):
            yield grid, k


@check("reduction", "cotangent_adjointness", ADJOINT_TOL)
def _cotangent_adjointness(rng: np.random.Generator) -> float:
    residual = 0.0
    for grid, k in _reduction_degrees():
        for _ in range(50):
            e, v = random_reduced_cotangent(grid, k, rng), random_tangent(grid, k, rng)
            lifted, projected = cotangent_quotient(e), tangent_quotient(v)
            difference = abs(phase_duality(lifted, v) - reduced_duality(e, projected))
            scale = reduced_duality_magnitude(e, projected) + pairing_magnitude(lifted.e_rho, v.rho_dot)
            residual = max(residual, _ratio(difference, scale))
    return residual


@check("reduction", "composition", ADJOINT_TOL)
def _composition(rng: np.random.Generator) -> float:
    residual = 0.0
    for grid, k in _reduction_degrees():
        for _ in range(5):
            e = random_reduced_cotangent(grid, k, rng)
            composed = reduced_sharp_composed(e)
            residual = max(residual, _relative((reduced_sharp(e) - composed).max_abs(), composed.max_abs()))
    return residual


@check("reduction", "gauge_invariance", ADJOINT_TOL)
def _gauge_invariance(rng: np.random.Generator) -> float:
    residual = 0.0
    for grid, k in _reduction_degrees():
        if k == 0:
            continue
        point = PhasePoint(k, random_form(grid, k, rng), random_form(grid, grid.n - k, rng))
        alpha = random_form(grid, k - 1, rng)
        moved = PhasePoint(k, gauge_act(point.rho, alpha), point.pi)
        difference = quotient_project(moved).rho_bar - quotient_project(point).rho_bar
        residual = max(residual, _relative(difference.max_abs(), _derivative_scale(alpha)))
    return residual


@check("reduction", "flow_effort_odd_dimensions", 0.0)
def _flow_effort_odd_dimensions(rng: np.random.Generator) -> float:
    rows = sign_table(seed=_seed(rng))
    return float(sum(1 for row in rows if row.n % 2 and not row.stokes_matrix_reproduced))


@check("fluid", "cotangent_phi_adjointness", COMPOSITION_TOL)
def _cotangent_phi_adjointness(rng: np.random.Generator) -> float:
    grid = Grid.periodic(FLUID_SIZES)
    residual = 0.0
    for _ in range(50):
        s, e = random_fluid_state(grid, rng), random_fluid_cotangent(grid, rng)
        rate = MomentumTangent(random_form(grid, 1, rng), random_form(grid, 3, rng))
        algebra_side = s_duality(cotangent_phi(e, s), rate)
        velocity_side = v_duality(e, tangent_phi(rate, phi_inverse(s)))
        residual = max(residual, _relative(abs(algebra_side - velocity_side), abs(algebra_side), abs(velocity_side)))
    return residual


@check("fluid", "velocity_composition", COMPOSITION_TOL)
def _velocity_composition(rng: np.random.Generator) -> float:
    grid = Grid.periodic(FLUID_SIZES)
    residual = 0.0
    for _ in range(20):
        s, e = random_fluid_state(grid, rng), random_fluid_cotangent(grid, rng)
        composed = velocity_sharp_composed(e, s)
        residual = max(residual, _relative((velocity_sharp(e, s) - composed).max_abs(), composed.max_abs()))
    return residual


@check("fluid", "convective_identity", ADJOINT_TOL)
def _convective_identity(rng: np.random.Generator) -> float:
    grid = Grid.periodic(FLUID_SIZES)
    s, e = random_fluid_state(grid, rng), random_fluid_cotangent(grid, rng)
    term = convective_term(e.e_theta, s.theta, s.rho)
    return _relative((term.interior - term.hodge).max_abs(), term.interior.max_abs())


def _v_magnitude(e: FluidCotangent, v: FluidTangent) -> float:
    return pairing_magnitude(e.e_theta, v.theta_dot) + pairing_magnitude(e.e_rho, v.rho_dot)


@check("fluid", "energy_skewness", ADJOINT_TOL)
def _energy_skewness(rng: np.random.Generator) -> float:
    grid = Grid.periodic(FLUID_SIZES)
    residual = 0.0
    for _ in range(10):
        s = random_fluid_state(grid, rng)
        e, f = random_fluid_cotangent(grid, rng), random_fluid_cotangent(grid, rng)
        first, second = velocity_sharp(f, s), velocity_sharp(e, s)
        value = v_duality(e, first) + v_duality(f, second)
        residual = max(residual, _ratio(abs(value), _v_magnitude(e, first) + _v_magnitude(f, second)))
    system = FluidSystem(grid)
    state = system.initial_state(_seed(rng))
    efforts, rates = system.efforts(state), system.evolution(state)
    return max(residual, _ratio(abs(system.energy_rate(state)), _v_magnitude(efforts, rates)))


@check("fluid", "coadjoint_convergence", CONVERGENCE_ORDER, lower_bound=True)
def _coadjoint_convergence(rng: np.random.Generator) -> float:
    return convergence_order(trigonometric_coadjoint_residual)


@check("fluid", "mass_casimir", ADJOINT_TOL)
def _mass_casimir(rng: np.random.Generator) -> float:
    grid = Grid.periodic(FLUID_SIZES)
    system = FluidSystem(grid)
    rate = system.evolution(system.initial_state(_seed(rng))).rho_dot
    return _ratio(abs(integrate(rate)), pairing_magnitude(Form.scalar(grid, 1.0), rate))


@check("fluid", "mass_drift", ADJOINT_TOL)
def _mass_drift(rng: np.random.Generator) -> float:
    system = FluidSystem(Grid.periodic(FLUID_SIZES))
    state = system.initial_state(_seed(rng))
    trace = integrate_system(system, state, IntegratorConfig(method="rk4", dt=1e-3, steps=100)).trace
    return trace.conserved_drift / abs(system.conserved(state))


def _line_rates_gap(expected: Sequence[np.ndarray], actual: Sequence[np.ndarray]) -> float:
    difference = max(float(np.max(np.abs(a - b))) for a, b in zip(actual, expected))
    return _relative(difference, *(float(np.max(np.abs(e))) for e in expected))


@check("systems", "telegrapher_pde", ADJOINT_TOL)
def _telegrapher_pde(rng: np.random.Generator) -> float:
    system = TelegrapherSystem(Grid.periodic(LINE_SIZES), L=1.5, C=0.5)
    state = system.initial_state(_seed(rng))
    rates = system.evolution(state)
    voltage_rate = hodge(rates.rho_bar_dot).values / system.params["C"]
    current_rate = -hodge(rates.pi_bar_dot).values / system.params["L"]
    return _line_rates_gap(system.pde_rates(state), (voltage_rate, current_rate))


@check("systems", "string_pde", ADJOINT_TOL)
def _string_pde(rng: np.random.Generator) -> float:
    system = StringSystem(Grid.periodic(LINE_SIZES), tension=2.0, mass_density=0.5)
    state = system.initial_state(_seed(rng))
    rates = system.evolution(state)
    return _line_rates_gap(system.wave_rates(state), (hodge(rates.rho_bar_dot).values, hodge(rates.pi_bar_dot).values))


def _curl(two_form: Form) -> np.ndarray:
    """
    Components of d∗F for a 2-form F on a Euclidean 3-dimensional grid, written out by hand
    """
    grid, c = two_form.grid, two_form.components
    vector = (c[2], -c[1], c[0])
    partial = lambda f, axis: centered_difference(f, axis, grid.spacings[axis])
    return np.stack(
        [
            partial(vector[1], 0) - partial(vector[0], 1),
            partial(vector[2], 0) - partial(vector[0], 2),
            partial(vector[2], 1) - partial(vector[1], 2),
        ]
    )


@check("systems", "maxwell_recovery", ADJOINT_TOL)
def _maxwell_recovery(rng: np.random.Generator) -> float:
    system = MaxwellSystem(Grid.periodic(FLUID_SIZES))
    state = system.initial_state(_seed(rng))
    b, d = system.fields(state)["B"], system.fields(state)["D"]
    b_rate, d_rate = system.field_rates(state)
    expected = (-_curl(d), _curl(b))
    return _line_rates_gap(expected, (b_rate.components, d_rate.components))


@check("systems", "maxwell_gauge_invariance", ADJOINT_TOL)
def _maxwell_gauge_invariance(rng: np.random.Generator) -> float:
    grid = Grid.periodic(FLUID_SIZES)
    potential, d, alpha = random_form(grid, 1, rng), random_form(grid, 2, rng), random_form(grid, 0, rng)
    energy = maxwell_hamiltonian(exterior_derivative(potential), d)
    moved = maxwell_hamiltonian(exterior_derivative(gauge_act(potential, alpha)), d)
    return _ratio(abs(moved - energy), energy)


@check("systems", "telegrapher_energy_drift", TELEGRAPHER_DRIFT_TOL)
def _telegrapher_energy_drift(rng: np.random.Generator) -> float:
    system = TelegrapherSystem(Grid.periodic(LINE_SIZES))
    cfg = IntegratorConfig(method="implicit_midpoint", dt=0.01, steps=1000)
    return integrate_system(system, system.initial_state(_seed(rng)), cfg).trace.max_drift


@check("systems", "maxwell_energy_drift", MAXWELL_DRIFT_TOL)
def _maxwell_energy_drift(rng: np.random.Generator) -> float:
    system = MaxwellSystem(Grid.periodic(FLUID_SIZES))
    cfg = IntegratorConfig(method="implicit_midpoint", dt=0.05, steps=200)
    return integrate_system(system, system.initial_state(_seed(rng)), cfg).trace.max_drift


def _effort_gap(system: HamiltonianSystem, rng: np.random.Generator) -> float:
    state = system.initial_state(_seed(rng))
    gap = system.effort_gap(state, system.random_direction(rng), EFFORT_STEP)
    return _relative(gap, abs(system.hamiltonian(state)))


@check("systems", "telegrapher_efforts", EFFORT_TOL)
def _telegrapher_efforts(rng: np.random.Generator) -> float:
    return _effort_gap(TelegrapherSystem(Grid.periodic(LINE_SIZES), L=2.0, C=0.5), rng)


@check("systems", "string_efforts", EFFORT_TOL)
def _string_efforts(rng: np.random.Generator) -> float:
    return _effort_gap(StringSystem(Grid.periodic(LINE_SIZES), tension=3.0), rng)


@check("systems", "maxwell_efforts", EFFORT_TOL)
def _maxwell_efforts(rng: np.random.Generator) -> float:
    return _effort_gap(MaxwellSystem(Grid.periodic(FLUID_SIZES)), rng)


@check("systems", "fluid_efforts", EFFORT_TOL)
def _fluid_efforts(rng: np.random.Generator) -> float:
    return _effort_gap(FluidSystem(Grid.periodic(FLUID_SIZES)), rng)


@check("systems", "rk4_decay", EXACT_TOL)
def _rk4_decay(rng: np.random.Generator) -> float:
    return abs(float(rk4_step(np.array([1.0]), lambda x: -x, 0.1)[0]) - RK4_DECAY_FACTOR)


@check("systems", "midpoint_decay", ADJOINT_TOL)
def _midpoint_decay(rng: np.random.Generator) -> float:
    return abs(float(implicit_midpoint_step(np.array([1.0]), lambda x: -x, 0.1)[0]) - 0.95 / 1.05)


@check("systems", "telegrapher_phase_velocity", PHASE_VELOCITY_TOL)
def _telegrapher_phase_velocity(rng: np.random.Generator) -> float:
    system = TelegrapherSystem(Grid.periodic(LINE_SIZES), L=1.0, C=4.0)
    speed = telegrapher_phase_velocity(system, IntegratorConfig(method="implicit_midpoint", dt=0.01, steps=400))
    return abs(speed - system.wave_speed) / system.wave_speed


class PropertyCheckSource(Source):
    """
    Generate one check item per property, in the given order
    """

    def __init__(self, checks: Iterable[PropertyCheck], tol_scale: float = 1.0):
        if not (math.isfinite(tol_scale) and tol_scale > 0):
            raise ConfigError(f"tol-scale must be positive, got {tol_scale}")
        self._checks = iter(checks)
        self._tol_scale = tol_scale

    def pop(self) -> Optional[CheckItem]:
        prop = next(self._checks, None)
        if prop is None:
            self.stop()
            return None
        # lower bounds are orders, not tolerances
        tolerance = prop.tolerance if prop.lower_bound else prop.tolerance * self._tol_scale
        item = CheckItem(prop.suite, prop.name, tolerance)
        item.set_metadata("check", prop)
        return item


class EvaluateStage(Stage):
    """
    Compute the residual of the check an item carries
    """

    def __init__(self, seed: int = DEFAULT_SEED):
        self._seed = seed

    def process(self, item: CheckItem) -> CheckItem:
        prop: PropertyCheck = item.get_metadata("check")
        item.set_metadata("seed", self._seed)
        item.residual = prop.evaluate(prop.rng(self._seed))
        _logger.debug(f"{item.id} residual {item.residual:.3e}")
        return item


class VerdictStage(Stage):
    """
    Compare the residual with the tolerance

    :raises ToleranceError: When the residual is out of tolerance or not a number
    """

    def process(self, item: CheckItem) -> CheckItem:
        prop: PropertyCheck = item.get_metadata("check")
        residual, tolerance = item.residual, item.tolerance
        if prop.lower_bound:
            passed = residual >= tolerance
        else:
            passed = residual <= tolerance
        if not passed:
            bound = "below the minimum" if prop.lower_bound else "above the tolerance"
            raise ToleranceError(f"residual {residual:.3e} {bound} {tolerance:.3e}", residual, tolerance)
        return item


def run_checks(
    suite: Optional[str] = None, seed: int = DEFAULT_SEED, tol_scale: float = 1.0, jobs: int = DEFAULT_JOBS
) -> List[CheckItem]:
    """
    Run the checks of a suite (or of all suites) through the check pipeline

    :param tol_scale: Factor applied to every tolerance, lower bounds excluded
    :param jobs: Checks evaluated concurrently
    :return: The processed items sorted by suite then property name
    """
    checks = select_checks(suite)
    pipeline = (
        CheckPipeline(max_workers=jobs)
        .set_source(PropertyCheckSource(checks, tol_scale))
        .append_stage("evaluate", EvaluateStage(seed))
        .append_stage("verdict", VerdictStage())
        .build()
    )
    _logger.info(f"Running {len(checks)} checks of suite {suite or 'all'} with seed {seed}")
    return sorted(pipeline.run(), key=lambda item: (item.suite, item.name))


def format_report(items: Sequence[CheckItem]) -> str:
    """
    One aligned line per check with its verdict, residual and tolerance, then a summary line
    """
    rows = []
    for item in items:
        prop: PropertyCheck = item.get_metadata("check")
        residual = "-" if item.residual is None else f"{item.residual:.3e}"
        bound = ">=" if prop is not None and prop.lower_bound else "<="
        verdict = "PASS" if item.passed else "FAIL"
        rows.append((verdict, item.id, residual, f"{bound} {item.tolerance:.3e}"))
    widths = [max((len(row[i]) for row in rows), default=0) for i in range(4)]
    lines = []
    for item, row in zip(items, rows):
        line = "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        reason = item.describe()
        lines.append(f"{line}  {reason}" if reason else line)
    failed = sum(1 for item in items if not item.passed)
    lines.append(f"{len(items)} checks, {failed} failed")
    return "\n".join(lines)
