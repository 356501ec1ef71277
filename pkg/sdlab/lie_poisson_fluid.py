"""
Lie-Poisson structure of the compressible isentropic fluid on a 3-dimensional periodic grid.

The symmetry algebra is the semidirect product of vector fields and functions, with bracket
[(ξ1, f1), (ξ2, f2)] = (-[ξ1, ξ2], ℒ_ξ2 f1 - ℒ_ξ1 f2).
Its dual holds momentum densities m = m_cov ⊗ dV together with the mass density ρ, and
the velocity representation (θ, ρ) is reached through m_cov = θ ρ̃, where ρ̃ = ∗ρ.

Lie derivatives follow Cartan's formula and the density weighted divergence is defined
through ℒ_X ρ = div_ρ(X) ρ, so that the chain of maps between the momentum and the velocity
representations is reproduced up to rounding, while the coadjoint duality only converges
under grid refinement.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from sdlab.defaults import DENSITY_THRESHOLD
from sdlab.error.exceptions import DegreeError, DensityError
from sdlab.grid_forms import (
    Form,
    Grid,
    VectorField,
    band_limited_field,
    exterior_derivative,
    flat,
    hodge,
    integrate,
    interior_product,
    lie_derivative,
    pairing,
    random_form,
    random_vector_field,
    sharp,
    volume_form,
    wedge,
)

_logger = logging.getLogger(__name__)

FLUID_DIMENSION = 3


def _check_fluid_grid(grid: Grid):
    if grid.n != FLUID_DIMENSION:
        raise DegreeError(f"The fluid structure needs a 3-dimensional grid, got dimension {grid.n}")


def _check_degree(form: Form, degree: int, name: str):
    if form.degree != degree:
        raise DegreeError(f"{name} must be a {degree}-form, got a {form.degree}-form")


def density(rho: Form) -> np.ndarray:
    """
    Scalar density ρ̃ = ∗ρ of a 3-form

    :raises DensityError: When ρ̃ falls below the positivity threshold somewhere
    """
    values = hodge(rho).values
    lowest = float(np.min(values))
    if lowest < DENSITY_THRESHOLD:
        raise DensityError(f"Density must be strictly positive, minimum is {lowest:.3e}")
    return values


@dataclass(frozen=True)
class AlgebraElement:
    xi: VectorField
    f: Form

    def __post_init__(self):
        _check_fluid_grid(self.xi.grid)
        self.xi.grid.check_same(self.f.grid)
        _check_degree(self.f, 0, "The function part")

    def __add__(self, other: AlgebraElement) -> AlgebraElement:
        return AlgebraElement(self.xi + other.xi, self.f + other.f)

    def __neg__(self) -> AlgebraElement:
        return AlgebraElement(-self.xi, -self.f)

    def __mul__(self, factor: float) -> AlgebraElement:
        return AlgebraElement(self.xi * factor, self.f * factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class MomentumState:
    """
    Momentum representation (m_cov, ρ), the momentum density being m_cov ⊗ dV
    """

    m_cov: Form
    rho: Form

    def __post_init__(self):
        _check_fluid_grid(self.rho.grid)
        self.m_cov.grid.check_same(self.rho.grid)
        _check_degree(self.m_cov, 1, "Momentum")
        _check_degree(self.rho, 3, "Density")
        density(self.rho)

    @property
    def grid(self) -> Grid:
        return self.rho.grid


@dataclass(frozen=True)
class MomentumTangent:
    m_dot: Form
    rho_dot: Form

    def __post_init__(self):
        self.m_dot.grid.check_same(self.rho_dot.grid)
        _check_degree(self.m_dot, 1, "Momentum rate")
        _check_degree(self.rho_dot, 3, "Density rate")


@dataclass(frozen=True)
class MomentumCotangent:
    e_m: Form
    e_rho: Form

    def __post_init__(self):
        self.e_m.grid.check_same(self.e_rho.grid)
        _check_degree(self.e_m, 1, "Momentum effort")
        _check_degree(self.e_rho, 0, "Density effort")


@dataclass(frozen=True)
class FluidState:
    """
    Velocity representation (θ, ρ), the velocity field being θ raised by the metric
    """

    theta: Form
    rho: Form

    def __post_init__(self):
        _check_fluid_grid(self.rho.grid)
        self.theta.grid.check_same(self.rho.grid)
        _check_degree(self.theta, 1, "Velocity")
        _check_degree(self.rho, 3, "Density")
        density(self.rho)

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def scalar_density(self) -> np.ndarray:
        return hodge(self.rho).values


@dataclass(frozen=True)
class FluidTangent:
    theta_dot: Form
    rho_dot: Form

    def __post_init__(self):
        self.theta_dot.grid.check_same(self.rho_dot.grid)
        _check_degree(self.theta_dot, 1, "Velocity rate")
        _check_degree(self.rho_dot, 3, "Density rate")

    def max_abs(self) -> float:
        return max(self.theta_dot.max_abs(), self.rho_dot.max_abs())

    def __sub__(self, other: FluidTangent) -> FluidTangent:
        return FluidTangent(self.theta_dot - other.theta_dot, self.rho_dot - other.rho_dot)

    def __neg__(self) -> FluidTangent:
        return FluidTangent(-self.theta_dot, -self.rho_dot)


@dataclass(frozen=True)
class FluidCotangent:
    e_theta: Form
    e_rho: Form

    def __post_init__(self):
        self.e_theta.grid.check_same(self.e_rho.grid)
        _check_degree(self.e_theta, 2, "Velocity effort")
        _check_degree(self.e_rho, 0, "Density effort")


@dataclass(frozen=True)
class ConvectiveTerm:
    """
    The convective one-form evaluated as an interior product and through Hodge stars
    """

    interior: Form
    hodge: Form


FluidPoint = Union[FluidState, MomentumState]
MomentumLike = Union[MomentumState, MomentumTangent]


def _velocity_point(point: FluidPoint) -> FluidState:
    return point if isinstance(point, FluidState) else phi(point)


def jacobi_lie_bracket(x: VectorField, y: VectorField) -> VectorField:
    """
    Jacobi-Lie bracket [X, Y]^i = X(Y^i) - Y(X^i), derivatives by centered differences
    """
    x.grid.check_same(y.grid)
    grid = x.grid
    components = []
    for i in range(grid.n):
        along_x = lie_derivative(x, Form.scalar(grid, y.components[i])).values
        along_y = lie_derivative(y, Form.scalar(grid, x.components[i])).values
        components.append(along_x - along_y)
    return VectorField(grid, np.stack(components))


def algebra_bracket(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """
    Semidirect product bracket (-[ξ1, ξ2], ℒ_ξ2 f1 - ℒ_ξ1 f2)
    """
    return AlgebraElement(
        -jacobi_lie_bracket(a.xi, b.xi),
        lie_derivative(b.xi, a.f) - lie_derivative(a.xi, b.f),
    )


def _momentum_pair(mu: MomentumLike):
    if isinstance(mu, MomentumTangent):
        return mu.m_dot, mu.rho_dot
    return mu.m_cov, mu.rho


def s_duality(a: AlgebraElement, mu: MomentumLike) -> float:
    """
    Pairing of the algebra with its dual, ∫ m_cov(ξ) dV + ∫ f ρ.
    With m_cov = θ ρ̃ this is ∫ (θ(ξ) + f) ρ
    """
    m_cov, rho = _momentum_pair(mu)
    a.xi.grid.check_same(rho.grid)
    momentum = interior_product(a.xi, m_cov)
    return integrate(wedge(momentum, volume_form(rho.grid))) + integrate(wedge(a.f, rho))


def div_rho(x: VectorField, rho: Form) -> Form:
    """
    Density weighted divergence ∗(d i_X ρ) / ρ̃, so that ℒ_X ρ = div_ρ(X) ρ
    """
    scalar = density(rho)
    return hodge(exterior_derivative(interior_product(x, rho))) / scalar


def coadjoint_star(a: AlgebraElement, mu: MomentumState) -> MomentumTangent:
    """
    Infinitesimal coadjoint action ((ℒ_ξ θ + div_ρ(ξ) θ + df) ρ̃, ℒ_ξ ρ), where θ = m_cov / ρ̃
    """
    scalar = density(mu.rho)
    theta = mu.m_cov / scalar
    divergence = div_rho(a.xi, mu.rho)
    rate = lie_derivative(a.xi, theta) + theta * divergence.values + exterior_derivative(a.f)
    return MomentumTangent(rate * scalar, lie_derivative(a.xi, mu.rho))


def lie_poisson_sharp_momentum(e: MomentumCotangent, mu: MomentumState) -> MomentumTangent:
    """
    Lie-Poisson map in the momentum representation: the coadjoint action of (e_m raised, e_ρ)
    """
    return coadjoint_star(AlgebraElement(sharp(e.e_m), e.e_rho), mu)


def phi(mu: MomentumState) -> FluidState:
    """
    Change of representation (m, ρ) ↦ (θ, ρ) with θ = m_cov / ρ̃
    """
    return FluidState(mu.m_cov / density(mu.rho), mu.rho)


def phi_inverse(s: FluidState) -> MomentumState:
    return MomentumState(s.theta * density(s.rho), s.rho)


def tangent_phi(v: MomentumTangent, mu: MomentumState) -> FluidTangent:
    """
    Tangent map of :func:`phi`, θ̇ = (ṁ_cov - θ ∗ρ̇) / ρ̃
    """
    scalar = density(mu.rho)
    theta = mu.m_cov / scalar
    theta_dot = (v.m_dot - theta * hodge(v.rho_dot).values) / scalar
    return FluidTangent(theta_dot, v.rho_dot)


def x_field(e_theta: Form, rho: Form) -> VectorField:
    """
    Vector field (∗e_θ) raised and divided by ρ̃, the one with i_X dV = e_θ / ρ̃
    """
    _check_degree(e_theta, 2, "Velocity effort")
    return sharp(hodge(e_theta)) / density(rho)


def cotangent_phi(e: FluidCotangent, point: FluidPoint) -> AlgebraElement:
    """
    Dual of the tangent map of :func:`phi`, ((∗e_θ)♯ / ρ̃, e_ρ - ∗(e_θ ∧ θ) / ρ̃)
    """
    s = _velocity_point(point)
    scalar = density(s.rho)
    return AlgebraElement(
        x_field(e.e_theta, s.rho),
        e.e_rho - hodge(wedge(e.e_theta, s.theta)) / scalar,
    )


def v_duality(e: FluidCotangent, v: FluidTangent) -> float:
    """
    Pairing ∫ e_θ ∧ θ̇ + e_ρ ρ̇ of velocity representation efforts and rates
    """
    return pairing(e.e_theta, v.theta_dot) + pairing(e.e_rho, v.rho_dot)


def convective_term(e_theta: Form, theta: Form, rho: Form) -> ConvectiveTerm:
    """
    Convective one-form (1/ρ̃) i_{(∗e_θ)♯} dθ, also evaluated as (1/ρ̃) ∗(∗dθ ∧ ∗e_θ).
    Swapping the operands of the inner wedge flips the sign of the second evaluation
    """
    scalar = density(rho)
    vorticity = exterior_derivative(theta)
    interior = interior_product(sharp(hodge(e_theta)), vorticity) / scalar
    starred = hodge(wedge(hodge(vorticity), hodge(e_theta))) / scalar
    return ConvectiveTerm(interior, starred)


def velocity_sharp(e: FluidCotangent, s: FluidState) -> FluidTangent:
    """
    Lie-Poisson map in the velocity representation, (de_ρ + (1/ρ̃) i_{(∗e_θ)♯} dθ, de_θ)
    """
    convective = convective_term(e.e_theta, s.theta, s.rho).interior
    return FluidTangent(exterior_derivative(e.e_rho) + convective, exterior_derivative(e.e_theta))


def velocity_sharp_composed(e: FluidCotangent, s: FluidState) -> FluidTangent:
    """
    The velocity representation map obtained by composing the tangent map of phi,
    the momentum Lie-Poisson map and the dual map of phi
    """
    mu = phi_inverse(s)
    a = cotangent_phi(e, s)
    return tangent_phi(lie_poisson_sharp_momentum(MomentumCotangent(flat(a.xi), a.f), mu), mu)


def velocity_skew_residual(e: FluidCotangent, f: FluidCotangent, s: FluidState) -> float:
    """
    |⟨e, [♯]f⟩ + ⟨f, [♯]e⟩| under the velocity representation pairing
    """
    return abs(v_duality(e, velocity_sharp(f, s)) + v_duality(f, velocity_sharp(e, s)))


def coadjoint_duality_residual(a: AlgebraElement, mu: MomentumState, b: AlgebraElement) -> float:
    """
    |⟨ad*_a μ, b⟩ - ⟨μ, [a, b]⟩|, which vanishes only in the continuum limit
    """
    return abs(s_duality(b, coadjoint_star(a, mu)) - s_duality(algebra_bracket(a, b), mu))


def trigonometric_coadjoint_residual(size: int) -> float:
    """
    Coadjoint duality residual on a cubic grid of the given size for smooth fields varying along
    the first axis: ξ = sin x¹ ∂₁, η = cos x¹ ∂₁, m_cov = 0.7 dx¹, ρ̃ = 1 + 0.05 cos x¹
    and the functions f = cos x², g = sin x³
    """
    grid = Grid.periodic((size,) * FLUID_DIMENSION)
    x1, x2, x3 = grid.mesh()
    a = AlgebraElement(VectorField.coordinate(grid, 0, np.sin(x1)), Form.scalar(grid, np.cos(x2)))
    b = AlgebraElement(VectorField.coordinate(grid, 0, np.cos(x1)), Form.scalar(grid, np.sin(x3)))
    mu = MomentumState(
        Form.basis(grid, (0,), 0.7),
        Form.scalar(grid, (1.0 + 0.05 * np.cos(x1)) * grid.volume_scale, degree=FLUID_DIMENSION),
    )
    residual = coadjoint_duality_residual(a, mu, b)
    _logger.debug(f"Coadjoint duality residual on {size}^3 nodes: {residual:.3e}")
    return residual


def convergence_order(residual: Callable[[int], float], sizes: Sequence[int] = (16, 32)) -> float:
    """
    Observed order of a residual between two grid sizes, log(r1 / r2) / log(N2 / N1)
    """
    coarse, fine = sizes
    first, second = residual(coarse), residual(fine)
    if second == 0.0:
        return math.inf
    return math.log(first / second) / math.log(fine / coarse)


def random_density(grid: Grid, rng: np.random.Generator, variation: float = 0.5) -> Form:
    """
    A smooth random 3-form with scalar density in [1 - variation, 1 + variation]
    """
    scalar = 1.0 + variation * band_limited_field(grid, rng)
    return Form.scalar(grid, scalar * grid.volume_scale, degree=grid.n)


def random_fluid_state(grid: Grid, rng: np.random.Generator) -> FluidState:
    return FluidState(random_form(grid, 1, rng), random_density(grid, rng))


def random_fluid_cotangent(grid: Grid, rng: np.random.Generator) -> FluidCotangent:
    return FluidCotangent(random_form(grid, 2, rng), random_form(grid, 0, rng))


def random_algebra_element(grid: Grid, rng: np.random.Generator) -> AlgebraElement:
    return AlgebraElement(random_vector_field(grid, rng), random_form(grid, 0, rng))
