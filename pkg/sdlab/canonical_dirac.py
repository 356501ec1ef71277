"""
The canonical Dirac structure on the cotangent bundle of a space of k-forms.

A point of T*Ω^k is a pair (ρ, π) with ρ a k-form and π an (n-k)-form,
tangent vectors are pairs (ρ̇, π̇) of the same degrees, cotangent vectors are pairs (e_ρ, e_π)
of degrees (n-k, k), paired with tangent vectors by ∫ e_ρ ∧ ρ̇ + e_π ∧ π̇.
The Dirac structure is the graph of the canonical map ♯(e_ρ, e_π) = (e_π, -e_ρ).

With the pairing in this operand order ♯ is skew, and its graph isotropic,
exactly when k(n-k) is even, the only exception on grids up to dimension 3 is (n, k) = (2, 1)
where ♯ comes out symmetric.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from sdlab.defaults import DEFAULT_SEED
from sdlab.error.exceptions import DegreeError
from sdlab.grid_forms import Form, Grid, pairing, random_form

_logger = logging.getLogger(__name__)


def _check_pair(first: Form, second: Form, first_degree: int):
    first.grid.check_same(second.grid)
    if first.degree != first_degree or first.degree + second.degree != first.grid.n:
        raise DegreeError(
            f"Expected a pair of degrees ({first_degree}, {first.grid.n - first_degree}), "
            f"got ({first.degree}, {second.degree})"
        )


@dataclass(frozen=True)
class PhasePoint:
    """
    A point (ρ, π) of T*Ω^k
    """

    k: int
    rho: Form
    pi: Form

    def __post_init__(self):
        _check_pair(self.rho, self.pi, self.k)

    @property
    def grid(self) -> Grid:
        return self.rho.grid


@dataclass(frozen=True)
class TangentAtPhase:
    """
    A tangent vector (ρ̇, π̇), of degrees (k, n-k)
    """

    rho_dot: Form
    pi_dot: Form

    def __post_init__(self):
        _check_pair(self.rho_dot, self.pi_dot, self.rho_dot.degree)

    @property
    def k(self) -> int:
        return self.rho_dot.degree

    @property
    def grid(self) -> Grid:
        return self.rho_dot.grid

    @classmethod
    def zeros(cls, grid: Grid, k: int) -> TangentAtPhase:
        return cls(Form.zeros(grid, k), Form.zeros(grid, grid.n - k))

    def as_cotangent(self) -> CotangentAtPhase:
        """
        Read the same pair of forms as a cotangent vector at configuration degree n-k
        """
        return CotangentAtPhase(self.rho_dot, self.pi_dot)

    def max_abs(self) -> float:
        return max(self.rho_dot.max_abs(), self.pi_dot.max_abs())

    def __add__(self, other: TangentAtPhase) -> TangentAtPhase:
        return TangentAtPhase(self.rho_dot + other.rho_dot, self.pi_dot + other.pi_dot)

    def __sub__(self, other: TangentAtPhase) -> TangentAtPhase:
        return TangentAtPhase(self.rho_dot - other.rho_dot, self.pi_dot - other.pi_dot)

    def __neg__(self) -> TangentAtPhase:
        return TangentAtPhase(-self.rho_dot, -self.pi_dot)

    def __mul__(self, factor: float) -> TangentAtPhase:
        return TangentAtPhase(self.rho_dot * factor, self.pi_dot * factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class CotangentAtPhase:
    """
    A cotangent vector (e_ρ, e_π), of degrees (n-k, k)
    """

    e_rho: Form
    e_pi: Form

    def __post_init__(self):
        _check_pair(self.e_pi, self.e_rho, self.e_pi.degree)

    @property
    def k(self) -> int:
        return self.e_pi.degree

    @property
    def grid(self) -> Grid:
        return self.e_pi.grid

    @classmethod
    def zeros(cls, grid: Grid, k: int) -> CotangentAtPhase:
        return cls(Form.zeros(grid, grid.n - k), Form.zeros(grid, k))

    def max_abs(self) -> float:
        return max(self.e_rho.max_abs(), self.e_pi.max_abs())

    def __add__(self, other: CotangentAtPhase) -> CotangentAtPhase:
        return CotangentAtPhase(self.e_rho + other.e_rho, self.e_pi + other.e_pi)

    def __sub__(self, other: CotangentAtPhase) -> CotangentAtPhase:
        return CotangentAtPhase(self.e_rho - other.e_rho, self.e_pi - other.e_pi)

    def __neg__(self) -> CotangentAtPhase:
        return CotangentAtPhase(-self.e_rho, -self.e_pi)

    def __mul__(self, factor: float) -> CotangentAtPhase:
        return CotangentAtPhase(self.e_rho * factor, self.e_pi * factor)

    __rmul__ = __mul__


def random_cotangent(grid: Grid, k: int, rng: np.random.Generator) -> CotangentAtPhase:
    return CotangentAtPhase(random_form(grid, grid.n - k, rng), random_form(grid, k, rng))


def random_tangent(grid: Grid, k: int, rng: np.random.Generator) -> TangentAtPhase:
    return TangentAtPhase(random_form(grid, k, rng), random_form(grid, grid.n - k, rng))


def phase_duality(e: CotangentAtPhase, v: TangentAtPhase) -> float:
    """
    Pairing ∫ e_ρ ∧ ρ̇ + e_π ∧ π̇ of a cotangent and a tangent vector

    :raises DegreeError: When the configuration degrees differ
    """
    if e.k != v.k:
        raise DegreeError(f"Cotangent vector at degree {e.k} cannot pair with a tangent vector at degree {v.k}")
    return pairing(e.e_rho, v.rho_dot) + pairing(e.e_pi, v.pi_dot)


def canonical_sharp(e: CotangentAtPhase) -> TangentAtPhase:
    """
    Canonical map ♯(e_ρ, e_π) = (e_π, -e_ρ)
    """
    return TangentAtPhase(e.e_pi, -e.e_rho)


GraphElement = Tuple[TangentAtPhase, CotangentAtPhase]


def graph_element(e: CotangentAtPhase) -> GraphElement:
    return canonical_sharp(e), e


def dirac_pairing(first: GraphElement, second: GraphElement) -> float:
    """
    Symmetric pairing ⟨⟨(v, α), (w, β)⟩⟩ = ½(α(w) + β(v)) on TQ ⊕ T*Q
    """
    v, alpha = first
    w, beta = second
    return 0.5 * (phase_duality(alpha, w) + phase_duality(beta, v))


def _default_grid(grid: Optional[Grid]) -> Grid:
    return grid if grid is not None else Grid.periodic((8,))


def _samples(grid: Grid, k: int, samples: int, seed: int) -> List[CotangentAtPhase]:
    if samples < 1:
        raise ValueError("At least one sample is needed")
    children = np.random.SeedSequence(seed).spawn(samples)
    return [random_cotangent(grid, k, np.random.default_rng(child)) for child in children]


def isotropy_residual(
    samples: int = 100, seed: int = DEFAULT_SEED, grid: Optional[Grid] = None, k: int = 0
) -> float:
    """
    Largest absolute Dirac pairing between random elements of the graph of ♯, self pairings included.
    Every sample draws from its own spawned seed sequence, so samples are independent of their evaluation order

    :param samples: Number of random cotangent vectors
    :param grid: Defaults to the circle with 8 nodes
    :param k: Configuration degree
    """
    grid = _default_grid(grid)
    elements = [graph_element(e) for e in _samples(grid, k, samples, seed)]
    residual = max(
        abs(dirac_pairing(first, second))
        for first, second in itertools.combinations_with_replacement(elements, 2)
    )
    _logger.debug(f"Isotropy residual on {samples} samples, n={grid.n}, k={k}: {residual:.3e}")
    return residual


def skew_residual(
    samples: int = 20, seed: int = DEFAULT_SEED, grid: Optional[Grid] = None, k: int = 0
) -> float:
    """
    Largest |⟨e, ♯e′⟩ + ⟨e′, ♯e⟩| over pairs of random cotangent vectors
    """
    grid = _default_grid(grid)
    drawn = _samples(grid, k, samples, seed)
    return max(
        abs(phase_duality(e, canonical_sharp(f)) + phase_duality(f, canonical_sharp(e)))
        for e, f in itertools.combinations_with_replacement(drawn, 2)
    )


def graph_dimension_ratio(grid: Optional[Grid] = None, k: int = 0) -> float:
    """
    Rank of the graph of ♯ divided by the dimension of TQ ⊕ T*Q at a point.
    A ratio of ½ together with isotropy certifies that the graph is maximally isotropic.
    The graph is assembled as a dense matrix, so only meant for small grids
    """
    grid = _default_grid(grid)
    template = CotangentAtPhase.zeros(grid, k)
    rho_size, pi_size = template.e_rho.components.size, template.e_pi.components.size
    columns = []
    for position in range(rho_size + pi_size):
        vector = np.zeros(rho_size + pi_size)
        vector[position] = 1.0
        e = CotangentAtPhase(
            Form(grid, grid.n - k, vector[:rho_size].reshape(template.e_rho.components.shape)),
            Form(grid, k, vector[rho_size:].reshape(template.e_pi.components.shape)),
        )
        v = canonical_sharp(e)
        columns.append(np.concatenate([v.rho_dot.components.ravel(), v.pi_dot.components.ravel(), vector]))
    graph = np.stack(columns, axis=1)
    return np.linalg.matrix_rank(graph) / graph.shape[0]
