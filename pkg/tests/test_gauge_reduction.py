import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdlab.canonical_dirac import PhasePoint, phase_duality, random_tangent
from sdlab.error.exceptions import ClosureError, DegreeError
from sdlab.gauge_reduction import (
    ReducedCotangent,
    ReducedState,
    SignSignature,
    cotangent_quotient,
    format_sign_table,
    gauge_act,
    matform1_sharp,
    quotient_project,
    random_reduced_cotangent,
    reduced_duality,
    reduced_duality_magnitude,
    reduced_sharp,
    reduced_sharp_composed,
    reduced_skew_residual,
    sign_row,
    sign_table,
    stokes_dirac_apply,
    tangent_quotient,
)
from sdlab.grid_forms import Form, Grid, exterior_derivative, random_form
from tests.utils import relative_gap

DEGREES = [(n, k) for n in (1, 2, 3) for k in range(n)]


def _grid(n):
    return Grid.periodic((8,) * n)


def test_sign_signature():
    sig = SignSignature(3, 1)
    assert (sig.p, sig.q, sig.r) == (2, 2, 5)
    assert sig.sign_redpoisson == -1
    assert sig.sign_matform1 == 1
    assert sig.sign_cotangent == 1
    assert sig.sign_flow_effort == -1
    assert sig.sign_fq == -1
    for n, k in DEGREES:
        sig = SignSignature(n, k)
        assert sig.sign_redpoisson == -sig.sign_matform1
    assert SignSignature.of(_grid(2), 0) == SignSignature(2, 0)
    with pytest.raises(DegreeError):
        SignSignature(2, 2)
    with pytest.raises(DegreeError):
        SignSignature(0, 0)


def test_reduced_types(grids_fx, rng_fx):
    grid = grids_fx[3]
    e = random_reduced_cotangent(grid, 1, rng_fx)
    assert e.k == 1 and e.e_rho_bar.degree == 1
    assert (e + e * -1.0).max_abs() == 0.0
    with pytest.raises(DegreeError):
        ReducedCotangent(Form.zeros(grid, 2), Form.zeros(grid, 1))
    with pytest.raises(DegreeError):
        ReducedState(1, Form.zeros(grid, 1), Form.zeros(grid, 2))
    v = reduced_sharp(e)
    assert v.k == 1 and v.rho_bar_dot.degree == 2 and v.pi_bar_dot.degree == 2
    with pytest.raises(DegreeError):
        reduced_duality(random_reduced_cotangent(grid, 0, rng_fx), v)


def test_gauge_act(grids_fx, rng_fx):
    grid = grids_fx[2]
    rho = random_form(grid, 1, rng_fx)
    alpha = random_form(grid, 0, rng_fx)
    assert (gauge_act(rho, alpha) - rho - exterior_derivative(alpha)).max_abs() == 0.0
    with pytest.raises(DegreeError):
        gauge_act(rho, random_form(grid, 1, rng_fx))


@pytest.mark.parametrize("n, k", [(n, k) for n, k in DEGREES if k > 0])
def test_gauge_invariance(n, k, rng_fx):
    grid = _grid(n)
    point = PhasePoint(k, random_form(grid, k, rng_fx), random_form(grid, n - k, rng_fx))
    alpha = random_form(grid, k - 1, rng_fx)
    moved = PhasePoint(k, gauge_act(point.rho, alpha), point.pi)
    first, second = quotient_project(point), quotient_project(moved)
    assert relative_gap(first.rho_bar, second.rho_bar) <= 1e-12
    assert np.array_equal(first.pi_bar.components, second.pi_bar.components)


def test_closure(grids_fx, rng_fx):
    grid = grids_fx[2]
    point = PhasePoint(0, random_form(grid, 0, rng_fx), random_form(grid, 2, rng_fx))
    reduced = quotient_project(point)
    assert reduced.check_closed() is reduced
    top = ReducedState(1, random_form(grid, 2, rng_fx), random_form(grid, 1, rng_fx))
    assert top.closure_residual() == 0.0
    with pytest.raises(ClosureError, match="not closed"):
        ReducedState(0, random_form(grid, 1, rng_fx), random_form(grid, 2, rng_fx)).check_closed()


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), degree=st.sampled_from(DEGREES))
def test_cotangent_adjointness(seed, degree):
    n, k = degree
    rng = np.random.default_rng(seed)
    grid = _grid(n)
    e = random_reduced_cotangent(grid, k, rng)
    v = random_tangent(grid, k, rng)
    reduced_side = reduced_duality(e, tangent_quotient(v))
    lifted_side = phase_duality(cotangent_quotient(e), v)
    scale = reduced_duality_magnitude(e, tangent_quotient(v))
    assert abs(reduced_side - lifted_side) <= 1e-12 * max(1.0, scale)


@pytest.mark.parametrize("n, k", DEGREES)
def test_composition(n, k, rng_fx):
    e = random_reduced_cotangent(_grid(n), k, rng_fx)
    composed, closed = reduced_sharp_composed(e), reduced_sharp(e)
    assert relative_gap(composed.rho_bar_dot, closed.rho_bar_dot) <= 1e-10
    assert relative_gap(composed.pi_bar_dot, closed.pi_bar_dot) <= 1e-10
    # the opposite sign on the second row only agrees where dē_ρ vanishes
    matrix = matform1_sharp(e)
    assert relative_gap(composed.pi_bar_dot, matrix.pi_bar_dot) > 1e-3


@pytest.mark.parametrize("n, k", [(1, 0), (3, 0), (3, 1), (3, 2)])
def test_flow_effort_odd_dimensions(n, k, rng_fx):
    sig = SignSignature(n, k)
    e = random_reduced_cotangent(_grid(n), k, rng_fx)
    f_p, f_q = stokes_dirac_apply(e.e_rho_bar, e.e_pi_bar)
    assert relative_gap(f_p, exterior_derivative(e.e_pi_bar) * sig.sign_flow_effort) <= 1e-13
    assert relative_gap(f_q, exterior_derivative(e.e_rho_bar)) <= 1e-13


def test_flow_effort_mismatch(grids_fx, rng_fx):
    e = random_reduced_cotangent(grids_fx[3], 1, rng_fx)
    with pytest.raises(DegreeError):
        stokes_dirac_apply(e.e_rho_bar, e.e_pi_bar, SignSignature(3, 0))


def test_reduced_skewness(rng_fx):
    for n, k in DEGREES:
        if (n, k) == (2, 1):
            continue
        grid = _grid(n)
        e, f = random_reduced_cotangent(grid, k, rng_fx), random_reduced_cotangent(grid, k, rng_fx)
        assert reduced_skew_residual(e, f) <= 1e-12


def test_sign_table():
    rows = sign_table()
    assert [(row.n, row.k) for row in rows] == DEGREES
    assert all(row.composition_matches_redpoisson for row in rows)
    assert not any(row.matform1_agrees for row in rows)
    assert [row.stokes_matrix_reproduced for row in rows] == [row.n % 2 == 1 for row in rows]
    assert all(row.skew for row in rows if (row.n, row.k) != (2, 1))
    row = rows[DEGREES.index((3, 1))]
    assert (row.sign_redpoisson, row.sign_matform1, row.sign_flow_effort) == (-1, 1, -1)
    assert sign_row(3, 1) == row
    assert [(row.n, row.k) for row in sign_table(1)] == [(1, 0)]
    with pytest.raises(ValueError):
        sign_table(4)


def test_format_sign_table():
    rows = sign_table(2)
    text = format_sign_table(rows)
    lines = text.splitlines()
    assert len(lines) == 4
    assert "composed=redpoisson" in lines[0]
    assert len({len(line) for line in lines}) == 1
    assert lines[1].split()[:5] == ["1", "0", "1", "1", "2"]
    assert lines[1].split()[5:7] == ["+1", "-1"]
    data = rows[0].as_dict()
    assert data["n"] == 1 and data["composition_matches_redpoisson"] is True
