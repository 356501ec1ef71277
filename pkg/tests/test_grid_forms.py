import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdlab.error.exceptions import DegreeError, GridMismatchError
from sdlab.grid_forms import (
    Form,
    Grid,
    VectorField,
    band_limited_field,
    exterior_derivative,
    flat,
    form_from_json,
    form_to_json,
    hodge,
    integrate,
    interior_product,
    l2_inner,
    lie_derivative,
    multi_indices,
    pairing,
    pairing_magnitude,
    permutation_sign,
    random_form,
    random_vector_field,
    sharp,
    volume_form,
    wedge,
)

GRIDS = {
    1: Grid.periodic((64,)),
    2: Grid.periodic((32, 32)),
    3: Grid.periodic((16, 16, 16)),
}

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dimensions = st.sampled_from((1, 2, 3))


def test_multi_indices():
    assert multi_indices(3, 2) == ((0, 1), (0, 2), (1, 2))
    assert multi_indices(2, 0) == ((),)
    assert multi_indices(3, 3) == ((0, 1, 2),)
    assert permutation_sign((0, 1, 2)) == 1
    assert permutation_sign((1, 0, 2)) == -1
    assert permutation_sign((2, 0, 1)) == 1


def test_grid():
    grid = Grid.periodic((8, 8, 6), metric=(1.0, 2.0, 0.5))
    assert grid.n == 3
    assert grid.shape == (8, 8, 6)
    assert grid.volume_scale == pytest.approx(1.0)
    assert grid.lengths == pytest.approx((2 * math.pi,) * 3)
    assert grid.cell_volume == pytest.approx((2 * math.pi) ** 3 / (8 * 8 * 6))
    x, y, z = grid.mesh()
    assert x.shape == grid.shape
    assert z[0, 0, 1] == pytest.approx(2 * math.pi / 6)
    with pytest.raises(ValueError):
        Grid.periodic((7,))
    with pytest.raises(ValueError):
        Grid.periodic((2, 8))
    with pytest.raises(ValueError):
        Grid.periodic((4, 4, 4, 4))
    with pytest.raises(ValueError):
        Grid.periodic((8,), metric=(0.0,))
    with pytest.raises(GridMismatchError):
        Grid.periodic((8,)).check_same(Grid.periodic((10,)))


def test_form(grids_fx, rng_fx):
    grid = grids_fx[2]
    a = random_form(grid, 1, rng_fx)
    assert a.components.shape == (2, 8, 8)
    with pytest.raises(ValueError):
        a.components[0, 0, 0] = 1.0
    with pytest.raises(DegreeError):
        a.values
    with pytest.raises(DegreeError):
        Form.zeros(grid, 3)
    with pytest.raises(ValueError):
        Form(grid, 1, np.zeros((1, 8, 8)))
    with pytest.raises(DegreeError):
        a + Form.zeros(grid, 2)
    with pytest.raises(GridMismatchError):
        a + Form.zeros(Grid.periodic((8, 10)), 1)
    assert (a - a).max_abs() == 0.0
    assert ((a * 2.0) / 2.0 - a).max_abs() == 0.0
    assert (-a + a).max_abs() == 0.0
    field = np.linspace(1.0, 2.0, 64).reshape(8, 8)
    assert np.array_equal((a * field).component((1,)), a.component((1,)) * field)
    basis = Form.basis(grid, (0, 1), 3.0)
    assert basis.degree == 2
    assert np.all(basis.values == 3.0)
    constant = Form.scalar(grid, 2.0, degree=2)
    assert np.all(constant.values == 2.0)
    with pytest.raises(DegreeError):
        Form.scalar(grid, 1.0, degree=1)
    with pytest.raises(DegreeError):
        Form.from_components(grid, 1, {(0, 1): 1.0})


def test_exterior_derivative(grids_fx):
    grid = grids_fx[1]
    (x,) = grid.mesh()
    h = grid.spacings[0]
    derivative = exterior_derivative(Form.scalar(grid, np.sin(x)))
    assert derivative.degree == 1
    assert np.allclose(derivative.values, np.cos(x) * np.sin(h) / h, atol=1e-14)
    with pytest.raises(DegreeError, match="derivative of top form undefined"):
        exterior_derivative(derivative)
    # the checkerboard mode is in the kernel
    checkerboard = Form.scalar(grid, (-1.0) ** np.arange(16))
    assert exterior_derivative(checkerboard).max_abs() == 0.0


@settings(max_examples=15, deadline=None)
@given(seed=seeds, n=dimensions)
def test_d_squared_zero(seed, n):
    rng = np.random.default_rng(seed)
    grid = GRIDS[n]
    for k in range(n - 1):
        a = random_form(grid, k, rng)
        scale = exterior_derivative(a).max_abs() / min(grid.spacings)
        assert exterior_derivative(exterior_derivative(a)).max_abs() <= 1e-13 * max(1.0, scale)


@settings(max_examples=15, deadline=None)
@given(seed=seeds, n=dimensions)
def test_stokes(seed, n):
    rng = np.random.default_rng(seed)
    grid = GRIDS[n]
    derivative = exterior_derivative(random_form(grid, n - 1, rng))
    scale = pairing_magnitude(Form.scalar(grid, 1.0), derivative)
    assert abs(integrate(derivative)) <= 1e-13 * scale


@settings(max_examples=15, deadline=None)
@given(seed=seeds, n=dimensions)
def test_adjointness(seed, n):
    rng = np.random.default_rng(seed)
    grid = GRIDS[n]
    for k in range(n):
        a, b = random_form(grid, k, rng), random_form(grid, n - k - 1, rng)
        da, db = exterior_derivative(a), exterior_derivative(b)
        value = pairing(da, b) + (-1) ** k * pairing(a, db)
        assert abs(value) <= 1e-12 * (pairing_magnitude(da, b) + pairing_magnitude(a, db))


def test_wedge(grids_fx, rng_fx):
    grid = grids_fx[3]
    dx, dy, dz = (Form.basis(grid, (i,)) for i in range(3))
    assert (wedge(dx, dy) - Form.basis(grid, (0, 1))).max_abs() == 0.0
    assert (wedge(dy, dx) + Form.basis(grid, (0, 1))).max_abs() == 0.0
    assert (wedge(wedge(dz, dx), dy) - Form.basis(grid, (0, 1, 2))).max_abs() == 0.0
    for k, l in ((1, 1), (1, 2), (0, 2)):
        a, b = random_form(grid, k, rng_fx), random_form(grid, l, rng_fx)
        difference = wedge(a, b) - wedge(b, a) * (-1) ** (k * l)
        assert difference.max_abs() <= 1e-15
    with pytest.raises(DegreeError):
        wedge(Form.zeros(grid, 2), Form.zeros(grid, 2))
    with pytest.raises(GridMismatchError):
        wedge(dx, Form.basis(grids_fx[2], (0,)))


def test_hodge(metric_grids_fx, rng_fx):
    for n, grid in metric_grids_fx.items():
        assert (hodge(Form.scalar(grid, 1.0)) - volume_form(grid)).max_abs() <= 1e-15
        for k in range(n + 1):
            a = random_form(grid, k, rng_fx)
            twice = hodge(hodge(a))
            assert (twice - a * (-1) ** (k * (n - k))).max_abs() <= 1e-13
            assert l2_inner(a, a) >= 0.0
    grid = Grid.periodic((8, 8, 8))
    assert (hodge(Form.basis(grid, (0, 2))) + Form.basis(grid, (1,))).max_abs() == 0.0
    assert (hodge(Form.basis(grid, (1, 2))) - Form.basis(grid, (0,))).max_abs() == 0.0


def test_musical(metric_grids_fx, rng_fx):
    for grid in metric_grids_fx.values():
        a = random_form(grid, 1, rng_fx)
        assert (flat(sharp(a)) - a).max_abs() <= 1e-15
        field = random_vector_field(grid, rng_fx)
        assert np.allclose(sharp(flat(field)).components, field.components, atol=1e-15)
    grid = metric_grids_fx[2]
    assert np.allclose(sharp(Form.basis(grid, (1,))).components[1], 1.0 / 3.0)
    with pytest.raises(DegreeError):
        sharp(Form.zeros(grid, 2))


def test_interior_product(grids_fx, rng_fx):
    grid = grids_fx[3]
    along_x = VectorField.coordinate(grid, 0)
    assert np.all(interior_product(along_x, Form.basis(grid, (0,))).values == 1.0)
    contracted = interior_product(along_x, Form.basis(grid, (0, 2)))
    assert (contracted - Form.basis(grid, (2,))).max_abs() == 0.0
    contracted = interior_product(VectorField.coordinate(grid, 2), Form.basis(grid, (0, 2)))
    assert (contracted + Form.basis(grid, (0,))).max_abs() == 0.0
    field = random_vector_field(grid, rng_fx)
    for k in (2, 3):
        twice = interior_product(field, interior_product(field, random_form(grid, k, rng_fx)))
        assert twice.max_abs() <= 1e-15
    with pytest.raises(DegreeError):
        interior_product(field, Form.zeros(grid, 0))


def test_lie_derivative(grids_fx, rng_fx):
    grid = grids_fx[1]
    (x,) = grid.mesh()
    h = grid.spacings[0]
    rate = lie_derivative(VectorField.coordinate(grid, 0), Form.scalar(grid, np.sin(x)))
    assert np.allclose(rate.values, np.cos(x) * np.sin(h) / h, atol=1e-14)
    grid = grids_fx[3]
    field = random_vector_field(grid, rng_fx)
    density = random_form(grid, 3, rng_fx)
    transported = lie_derivative(field, density)
    assert abs(integrate(transported)) <= 1e-12 * pairing_magnitude(Form.scalar(grid, 1.0), transported)
    a = random_form(grid, 1, rng_fx)
    cartan = interior_product(field, exterior_derivative(a)) + exterior_derivative(interior_product(field, a))
    assert (lie_derivative(field, a) - cartan).max_abs() == 0.0


def test_integrate(metric_grids_fx, grids_fx):
    for grid in metric_grids_fx.values():
        assert integrate(volume_form(grid)) == pytest.approx(math.prod(grid.lengths) * grid.volume_scale)
    with pytest.raises(DegreeError):
        integrate(Form.zeros(grids_fx[2], 1))
    with pytest.raises(DegreeError):
        pairing(Form.zeros(grids_fx[2], 1), Form.zeros(grids_fx[2], 0))


def test_band_limited_field(grids_fx):
    grid = Grid.periodic((24, 24))
    field = band_limited_field(grid, np.random.default_rng(3))
    assert np.max(np.abs(field)) == pytest.approx(1.0)
    spectrum = np.abs(np.fft.fftn(field))
    wavenumbers = np.abs(np.fft.fftfreq(24, d=1.0 / 24))
    outside = (wavenumbers[:, None] > 4) | (wavenumbers[None, :] > 4)
    assert np.max(spectrum[outside]) <= 1e-12
    first = random_form(grids_fx[3], 2, np.random.default_rng(11))
    second = random_form(grids_fx[3], 2, np.random.default_rng(11))
    assert np.array_equal(first.components, second.components)


def test_form_json(grids_fx, metric_grids_fx, rng_fx):
    a = random_form(grids_fx[3], 2, rng_fx)
    data = form_to_json(a)
    assert set(data["components"]) == {"1,2", "1,3", "2,3"}
    assert data["sizes"] == [8, 8, 8]
    assert len(data["components"]["1,3"]) == 512
    assert data["components"]["1,3"][1] == a.component((0, 2))[0, 0, 1]
    restored = form_from_json(data)
    assert restored.grid == a.grid
    assert np.array_equal(restored.components, a.components)
    scalar = random_form(metric_grids_fx[2], 0, rng_fx)
    data = form_to_json(scalar)
    assert list(data["components"]) == [""]
    assert np.array_equal(form_from_json(data).values, scalar.values)
