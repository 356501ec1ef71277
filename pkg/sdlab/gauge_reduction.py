"""
Reduction of T*Ω^k by the additive gauge action ρ ↦ ρ + dα of (k-1)-forms.

The quotient is identified with dΩ^k × Ω^{n-k} through π_G(ρ, π) = (dρ, π).
Tangent and cotangent maps of π_G are

* Tπ_G(ρ̇, π̇) = (dρ̇, π̇)
* T*π_G(ē_ρ, ē_π) = ((-1)^{n-k} dē_ρ, ē_π)

and the reduced Poisson map is the composition [♯] = Tπ_G ∘ ♯ ∘ T*π_G, evaluated literally by
:func:`reduced_sharp_composed`. Its closed form (dē_π, (-1)^{n-k-1} dē_ρ) is :func:`reduced_sharp`,
the matrix form with the opposite sign on the second row is kept as :func:`matform1_sharp`
to report the discrepancy in :func:`sign_table`.

Flat tori have harmonic forms, so not every closed form is exact: reduced states
are built as exterior derivatives and only their closure is checked.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sdlab.canonical_dirac import CotangentAtPhase, PhasePoint, TangentAtPhase, canonical_sharp
from sdlab.defaults import ADJOINT_TOL, DEFAULT_SEED, EXACT_TOL
from sdlab.error.exceptions import ClosureError, DegreeError
from sdlab.grid_forms import Form, Grid, exterior_derivative, pairing, pairing_magnitude, random_form

_logger = logging.getLogger(__name__)


def _sign(exponent: int) -> int:
    return -1 if exponent % 2 else 1


@dataclass(frozen=True)
class SignSignature:
    """
    Sign bookkeeping of the reduced structure for configuration degree k in dimension n,
    with the flow/effort degrees p = n - k, q = k + 1 and the exponent r = pq + 1
    """

    n: int
    k: int

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.k < self.n:
            raise DegreeError(f"Configuration degree must satisfy 0 <= k < n, got n={self.n}, k={self.k}")

    @classmethod
    def of(cls, grid: Grid, k: int) -> SignSignature:
        return cls(grid.n, k)

    @property
    def p(self) -> int:
        return self.n - self.k

    @property
    def q(self) -> int:
        return self.k + 1

    @property
    def r(self) -> int:
        return self.p * self.q + 1

    @property
    def sign_redpoisson(self) -> int:
        return _sign(self.n - self.k - 1)

    @property
    def sign_cotangent(self) -> int:
        return _sign(self.n - self.k)

    @property
    def sign_flow_effort(self) -> int:
        return _sign(self.r)

    @property
    def sign_fq(self) -> int:
        return _sign(self.n - self.p)

    @property
    def sign_matform1(self) -> int:
        return _sign(self.n - self.k)


@dataclass(frozen=True)
class ReducedState:
    """
    A point (ρ̄, π̄) of the reduced phase space, ρ̄ a closed (k+1)-form and π̄ an (n-k)-form.
    Closure is not enforced on construction, see :meth:`ReducedState.check_closed`
    """

    k: int
    rho_bar: Form
    pi_bar: Form

    def __post_init__(self):
        self.rho_bar.grid.check_same(self.pi_bar.grid)
        n = self.rho_bar.grid.n
        if self.rho_bar.degree != self.k + 1 or self.pi_bar.degree != n - self.k:
            raise DegreeError(
                f"A reduced state at degree {self.k} needs forms of degrees ({self.k + 1}, {n - self.k}), "
                f"got ({self.rho_bar.degree}, {self.pi_bar.degree})"
            )

    @property
    def grid(self) -> Grid:
        return self.rho_bar.grid

    def closure_residual(self) -> float:
        """
        max |dρ̄|, zero for top-degree ρ̄
        """
        if self.rho_bar.degree == self.grid.n:
            return 0.0
        return exterior_derivative(self.rho_bar).max_abs()

    def check_closed(self, tolerance: float = ADJOINT_TOL) -> ReducedState:
        """
        :raises ClosureError: When max |dρ̄| exceeds the tolerance, relative to max(1, max |ρ̄|)
        """
        residual = self.closure_residual()
        if residual > tolerance * max(1.0, self.rho_bar.max_abs()):
            raise ClosureError(f"Reduced state is not closed, max |dρ̄| = {residual:.3e}")
        return self


@dataclass(frozen=True)
class ReducedCotangent:
    """
    A reduced effort (ē_ρ, ē_π) of degrees (n-k-1, k)
    """

    e_rho_bar: Form
    e_pi_bar: Form

    def __post_init__(self):
        self.e_rho_bar.grid.check_same(self.e_pi_bar.grid)
        if self.e_rho_bar.degree + self.e_pi_bar.degree != self.e_pi_bar.grid.n - 1:
            raise DegreeError(
                f"Reduced effort degrees must add up to n-1, got ({self.e_rho_bar.degree}, {self.e_pi_bar.degree})"
            )

    @property
    def k(self) -> int:
        return self.e_pi_bar.degree

    @property
    def grid(self) -> Grid:
        return self.e_pi_bar.grid

    def max_abs(self) -> float:
        return max(self.e_rho_bar.max_abs(), self.e_pi_bar.max_abs())

    def __add__(self, other: ReducedCotangent) -> ReducedCotangent:
        return ReducedCotangent(self.e_rho_bar + other.e_rho_bar, self.e_pi_bar + other.e_pi_bar)

    def __mul__(self, factor: float) -> ReducedCotangent:
        return ReducedCotangent(self.e_rho_bar * factor, self.e_pi_bar * factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ReducedTangent:
    """
    A reduced flow (ρ̄̇, π̄̇) of degrees (k+1, n-k)
    """

    rho_bar_dot: Form
    pi_bar_dot: Form

    def __post_init__(self):
        self.rho_bar_dot.grid.check_same(self.pi_bar_dot.grid)
        if self.rho_bar_dot.degree + self.pi_bar_dot.degree != self.pi_bar_dot.grid.n + 1:
            raise DegreeError(
                f"Reduced flow degrees must add up to n+1, got ({self.rho_bar_dot.degree}, {self.pi_bar_dot.degree})"
            )

    @property
    def k(self) -> int:
        return self.rho_bar_dot.degree - 1

    @property
    def grid(self) -> Grid:
        return self.pi_bar_dot.grid

    def max_abs(self) -> float:
        return max(self.rho_bar_dot.max_abs(), self.pi_bar_dot.max_abs())

    def __sub__(self, other: ReducedTangent) -> ReducedTangent:
        return ReducedTangent(self.rho_bar_dot - other.rho_bar_dot, self.pi_bar_dot - other.pi_bar_dot)


def random_reduced_cotangent(grid: Grid, k: int, rng: np.random.Generator) -> ReducedCotangent:
    return ReducedCotangent(random_form(grid, grid.n - k - 1, rng), random_form(grid, k, rng))


def gauge_act(rho: Form, alpha: Form) -> Form:
    """
    Additive gauge action ρ ↦ ρ + dα

    :raises DegreeError: When α is not of degree k-1
    """
    if alpha.degree != rho.degree - 1:
        raise DegreeError(f"A {rho.degree}-form is acted on by ({rho.degree - 1})-forms, got a {alpha.degree}-form")
    return rho + exterior_derivative(alpha)


def quotient_project(s: PhasePoint) -> ReducedState:
    """
    Quotient map π_G(ρ, π) = (dρ, π)
    """
    return ReducedState(s.k, exterior_derivative(s.rho), s.pi)


def tangent_quotient(v: TangentAtPhase) -> ReducedTangent:
    return ReducedTangent(exterior_derivative(v.rho_dot), v.pi_dot)


def cotangent_quotient(e: ReducedCotangent) -> CotangentAtPhase:
    """
    Dual of the tangent quotient map, T*π_G(ē_ρ, ē_π) = ((-1)^{n-k} dē_ρ, ē_π)
    """
    sign = SignSignature.of(e.grid, e.k).sign_cotangent
    return CotangentAtPhase(exterior_derivative(e.e_rho_bar) * sign, e.e_pi_bar)


def reduced_duality(e: ReducedCotangent, v: ReducedTangent) -> float:
    """
    Pairing ∫ ē_ρ ∧ ρ̄̇ + ē_π ∧ π̄̇ of reduced efforts and flows
    """
    if e.k != v.k:
        raise DegreeError(f"Reduced effort at degree {e.k} cannot pair with a reduced flow at degree {v.k}")
    return pairing(e.e_rho_bar, v.rho_bar_dot) + pairing(e.e_pi_bar, v.pi_bar_dot)


def reduced_duality_magnitude(e: ReducedCotangent, v: ReducedTangent) -> float:
    return pairing_magnitude(e.e_rho_bar, v.rho_bar_dot) + pairing_magnitude(e.e_pi_bar, v.pi_bar_dot)


def reduced_sharp(e: ReducedCotangent, sig: Optional[SignSignature] = None) -> ReducedTangent:
    """
    Closed form of the reduced Poisson map, (dē_π, (-1)^{n-k-1} dē_ρ)
    """
    sig = sig or SignSignature.of(e.grid, e.k)
    return ReducedTangent(exterior_derivative(e.e_pi_bar), exterior_derivative(e.e_rho_bar) * sig.sign_redpoisson)


def reduced_sharp_composed(e: ReducedCotangent) -> ReducedTangent:
    """
    Reduced Poisson map as the literal composition Tπ_G ∘ ♯ ∘ T*π_G
    """
    return tangent_quotient(canonical_sharp(cotangent_quotient(e)))


def matform1_sharp(e: ReducedCotangent, sig: Optional[SignSignature] = None) -> ReducedTangent:
    """
    Matrix form of the reduced map with sign (-1)^{n-k} on the second row, which disagrees with the composition
    """
    sig = sig or SignSignature.of(e.grid, e.k)
    return ReducedTangent(exterior_derivative(e.e_pi_bar), exterior_derivative(e.e_rho_bar) * sig.sign_matform1)


def stokes_dirac_apply(e_p: Form, e_q: Form, sig: Optional[SignSignature] = None) -> Tuple[Form, Form]:
    """
    Apply the reduced map in flow/effort variables e_p = ē_ρ, e_q = (-1)^r ē_π, f_p = ρ̄̇, f_q = (-1)^{n-p} π̄̇

    :param e_p: Effort of degree n-k-1
    :param e_q: Effort of degree k
    :return: The flows (f_p, f_q). For odd n they are ((-1)^r de_q, de_p)
    """
    sig = sig or SignSignature.of(e_q.grid, e_q.degree)
    if (sig.n, sig.k) != (e_q.grid.n, e_q.degree):
        raise DegreeError(f"Efforts of degrees ({e_p.degree}, {e_q.degree}) do not match {sig}")
    flows = reduced_sharp_composed(ReducedCotangent(e_p, e_q * sig.sign_flow_effort))
    return flows.rho_bar_dot, flows.pi_bar_dot * sig.sign_fq


def reduced_skew_residual(e: ReducedCotangent, f: ReducedCotangent) -> float:
    """
    Relative |⟨ē, [♯]ē′⟩ + ⟨ē′, [♯]ē⟩|
    """
    first, second = reduced_sharp_composed(f), reduced_sharp_composed(e)
    scale = reduced_duality_magnitude(e, first) + reduced_duality_magnitude(f, second)
    return abs(reduced_duality(e, first) + reduced_duality(f, second)) / max(scale, np.finfo(float).tiny)


@dataclass(frozen=True)
class SignRow:
    n: int
    k: int
    p: int
    q: int
    r: int
    sign_redpoisson: int
    sign_matform1: int
    sign_cotangent: int
    sign_flow_effort: int
    sign_fq: int
    composition_matches_redpoisson: bool
    matform1_agrees: bool
    stokes_matrix_reproduced: bool
    skew: bool

    def as_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _agree(first: Form, second: Form, tolerance: float) -> bool:
    return (first - second).max_abs() <= tolerance * max(1.0, first.max_abs(), second.max_abs())


def sign_row(n: int, k: int, size: int = 8, seed: int = DEFAULT_SEED, tolerance: float = EXACT_TOL) -> SignRow:
    """
    Compare the closed forms of the reduced map with the composition on random efforts for one (n, k)
    """
    sig = SignSignature(n, k)
    grid = Grid.periodic((size,) * n)
    rng = np.random.default_rng([seed, n, k])
    e, f = random_reduced_cotangent(grid, k, rng), random_reduced_cotangent(grid, k, rng)
    composed = reduced_sharp_composed(e)
    closed = reduced_sharp(e, sig)
    matrix = matform1_sharp(e, sig)
    f_p, f_q = stokes_dirac_apply(e.e_rho_bar, e.e_pi_bar, sig)
    row = SignRow(
        n=n,
        k=k,
        p=sig.p,
        q=sig.q,
        r=sig.r,
        sign_redpoisson=sig.sign_redpoisson,
        sign_matform1=sig.sign_matform1,
        sign_cotangent=sig.sign_cotangent,
        sign_flow_effort=sig.sign_flow_effort,
        sign_fq=sig.sign_fq,
        composition_matches_redpoisson=_agree(composed.rho_bar_dot, closed.rho_bar_dot, tolerance)
        and _agree(composed.pi_bar_dot, closed.pi_bar_dot, tolerance),
        matform1_agrees=_agree(composed.pi_bar_dot, matrix.pi_bar_dot, tolerance),
        stokes_matrix_reproduced=_agree(f_p, exterior_derivative(e.e_pi_bar) * sig.sign_flow_effort, tolerance)
        and _agree(f_q, exterior_derivative(e.e_rho_bar), tolerance),
        skew=reduced_skew_residual(e, f) <= ADJOINT_TOL,
    )
    _logger.debug(f"Sign row for n={n}, k={k}: {row}")
    return row


def sign_table(n_max: int = 3, size: int = 8, seed: int = DEFAULT_SEED) -> List[SignRow]:
    """
    Sign and agreement report for every 1 <= n <= n_max and 0 <= k < n

    :param size: Nodes per axis of the grids the agreements are computed on
    """
    if not 1 <= n_max <= 3:
        raise ValueError(f"Grids exist for dimensions 1 to 3, got n_max={n_max}")
    return [sign_row(n, k, size, seed) for n in range(1, n_max + 1) for k in range(n)]


_COLUMNS = (
    ("n", "n"),
    ("k", "k"),
    ("p", "p"),
    ("q", "q"),
    ("r", "r"),
    ("sign_redpoisson", "redpoisson"),
    ("sign_matform1", "matform1"),
    ("sign_cotangent", "cotangent"),
    ("sign_flow_effort", "(-1)^r"),
    ("sign_fq", "f_q"),
    ("composition_matches_redpoisson", "composed=redpoisson"),
    ("matform1_agrees", "composed=matform1"),
    ("stokes_matrix_reproduced", "flow/effort matrix"),
    ("skew", "skew"),
)


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return f"{value:+d}"


def format_sign_table(rows: Sequence[SignRow]) -> str:
    """
    Render sign rows as an aligned text table
    """
    header = [title for _, title in _COLUMNS]
    body = []
    for row in rows:
        values = row.as_dict()
        cells = []
        for field, _ in _COLUMNS:
            value = values[field]
            cells.append(str(value) if field in ("n", "k", "p", "q", "r") else _cell(value))
        body.append(cells)
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(line, widths)) for line in [header] + body]
    return "\n".join(lines)
