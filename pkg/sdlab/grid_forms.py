"""
Discrete exterior calculus on periodic structured grids.

The manifold is a flat torus T^n (n <= 3) sampled on a uniform grid with a constant diagonal metric.
Forms are collocated: every component of a k-form is an array of node values.
The exterior derivative uses centered differences with periodic wraparound,
so that d∘d = 0, the discrete Stokes theorem and the skew-adjointness of d under the
wedge pairing hold up to rounding, while wedge, Hodge star, sharp/flat and interior products
are pointwise algebra.

Centered differences have a checkerboard null mode on even grids, random fields are
band-limited so that the mode never matters.

The torus has non trivial cohomology: reduced states are always built as exterior derivatives,
so harmonic forms never enter the reduced dynamics.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from sdlab.defaults import BAND_FRACTION, DEFAULT_LENGTH, MIN_GRID_SIZE
from sdlab.error.exceptions import DegreeError, GridMismatchError

_logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
Scalar = Union[int, float]
FieldLike = Union[Scalar, np.ndarray]


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> Tuple[MultiIndex, ...]:
    """
    Strictly increasing 0-based multi-indices of length k in {0..n-1}, in component order
    """
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def _positions(n: int, k: int) -> Dict[MultiIndex, int]:
    return {index: pos for pos, index in enumerate(multi_indices(n, k))}


def permutation_sign(sequence: Sequence[int]) -> int:
    """
    Sign of the permutation sorting a sequence of distinct integers
    """
    inversions = sum(
        1
        for i in range(len(sequence))
        for j in range(i + 1, len(sequence))
        if sequence[i] > sequence[j]
    )
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _derivative_table(n: int, k: int) -> Tuple[Tuple[int, int, int, int], ...]:
    # (source component, axis, target component, sign)
    table = []
    positions = _positions(n, k + 1)
    for source, index in enumerate(multi_indices(n, k)):
        for axis in range(n):
            if axis in index:
                continue
            target = tuple(sorted(index + (axis,)))
            sign = -1 if target.index(axis) % 2 else 1
            table.append((source, axis, positions[target], sign))
    return tuple(table)


@lru_cache(maxsize=None)
def _wedge_table(n: int, k: int, l: int) -> Tuple[Tuple[int, int, int, int], ...]:
    table = []
    positions = _positions(n, k + l)
    for left, first in enumerate(multi_indices(n, k)):
        for right, second in enumerate(multi_indices(n, l)):
            if set(first) & set(second):
                continue
            target = tuple(sorted(first + second))
            table.append((left, right, positions[target], permutation_sign(first + second)))
    return tuple(table)


@lru_cache(maxsize=None)
def _interior_table(n: int, k: int) -> Tuple[Tuple[int, int, int, int], ...]:
    # (source component of degree k, axis, target component of degree k-1, sign)
    table = []
    positions = _positions(n, k)
    for target, index in enumerate(multi_indices(n, k - 1)):
        for axis in range(n):
            if axis in index:
                continue
            source = tuple(sorted(index + (axis,)))
            sign = -1 if source.index(axis) % 2 else 1
            table.append((positions[source], axis, target, sign))
    return tuple(table)


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid of a flat torus with a constant diagonal metric.

    :param sizes: Number of nodes per axis, each even and at least 4
    :param spacings: Positive step per axis
    :param metric: Positive diagonal metric coefficients g_ii
    """

    sizes: Tuple[int, ...]
    spacings: Tuple[float, ...]
    metric: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "spacings", tuple(float(h) for h in self.spacings))
        object.__setattr__(self, "metric", tuple(float(g) for g in self.metric))
        if not 1 <= len(self.sizes) <= 3:
            raise ValueError(f"Grid dimension must be 1, 2 or 3, not {len(self.sizes)}")
        if len(self.spacings) != len(self.sizes) or len(self.metric) != len(self.sizes):
            raise ValueError("Sizes, spacings and metric must have one entry per axis")
        for size in self.sizes:
            if size < MIN_GRID_SIZE or size % 2:
                raise ValueError(f"Grid sizes must be even and at least {MIN_GRID_SIZE}, got {size}")
        if any(h <= 0 for h in self.spacings):
            raise ValueError("Grid spacings must be positive")
        if any(g <= 0 for g in self.metric):
            raise ValueError("Metric coefficients must be positive")

    @classmethod
    def periodic(
        cls,
        sizes: Sequence[int],
        length: Union[float, Sequence[float]] = DEFAULT_LENGTH,
        metric: Optional[Sequence[float]] = None,
    ) -> Grid:
        """
        Build a grid covering a torus of the given period(s)

        :param length: Period of every axis, or one period per axis
        :param metric: Diagonal metric, Euclidean by default
        """
        sizes = tuple(sizes)
        lengths = (length,) * len(sizes) if np.isscalar(length) else tuple(length)
        spacings = tuple(l / s for l, s in zip(lengths, sizes))
        return cls(sizes, spacings, tuple(metric) if metric is not None else (1.0,) * len(sizes))

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.sizes

    @property
    def volume_scale(self) -> float:
        """
        Factor √det(g) of the volume form dV
        """
        return math.sqrt(math.prod(self.metric))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacings)

    @property
    def lengths(self) -> Tuple[float, ...]:
        return tuple(h * s for h, s in zip(self.spacings, self.sizes))

    def mesh(self) -> Tuple[np.ndarray, ...]:
        """
        Node coordinates, one array per axis shaped like the grid
        """
        axes = [np.arange(s) * h for s, h in zip(self.sizes, self.spacings)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def check_same(self, other: Grid):
        if self != other:
            raise GridMismatchError(f"Fields live on different grids: {self} and {other}")


def _as_field(grid: Grid, value: FieldLike) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.ndim and array.shape != grid.shape:
        raise GridMismatchError(f"Scalar field of shape {array.shape} does not match grid shape {grid.shape}")
    return array


class Form:
    """
    A k-form on a grid, stored as C(n,k) component arrays stacked on the first axis,
    in the order of :func:`multi_indices`
    """

    __slots__ = ("_grid", "_degree", "_components")

    def __init__(self, grid: Grid, degree: int, components: Any):
        if not 0 <= degree <= grid.n:
            raise DegreeError(f"Degree {degree} is not admitted on a {grid.n}-dimensional grid")
        array = np.array(components, dtype=float)
        expected = (math.comb(grid.n, degree),) + grid.shape
        if array.shape != expected:
            raise ValueError(f"A {degree}-form needs components of shape {expected}, got {array.shape}")
        array.flags.writeable = False
        self._grid = grid
        self._degree = degree
        self._components = array

    @classmethod
    def zeros(cls, grid: Grid, degree: int) -> Form:
        return cls(grid, degree, np.zeros((math.comb(grid.n, degree),) + grid.shape))

    @classmethod
    def scalar(cls, grid: Grid, values: FieldLike, degree: int = 0) -> Form:
        """
        A form with a single component (degree 0 or n) from a scalar field or a constant
        """
        if degree not in (0, grid.n):
            raise DegreeError(f"Only 0-forms and {grid.n}-forms have a single component")
        return cls(grid, degree, np.broadcast_to(_as_field(grid, values), grid.shape)[None])

    @classmethod
    def from_components(cls, grid: Grid, degree: int, components: Mapping[MultiIndex, FieldLike]) -> Form:
        """
        Build a form from a mapping of 0-based increasing multi-indices to fields (missing ones are zero)
        """
        positions = _positions(grid.n, degree)
        array = np.zeros((len(positions),) + grid.shape)
        for index, value in components.items():
            index = tuple(index)
            if index not in positions:
                raise DegreeError(f"{index} is not an increasing multi-index of length {degree}")
            array[positions[index]] = _as_field(grid, value)
        return cls(grid, degree, array)

    @classmethod
    def basis(cls, grid: Grid, index: MultiIndex, coefficient: FieldLike = 1.0) -> Form:
        """
        The basis form dx^{i1} ∧ ... ∧ dx^{ik} (0-based axes) times a coefficient
        """
        return cls.from_components(grid, len(index), {tuple(index): coefficient})

    @property
    def grid(self) -> Grid:
        return self._grid

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def components(self) -> np.ndarray:
        return self._components

    @property
    def values(self) -> np.ndarray:
        """
        The single component of a 0-form or of a top form
        """
        if self._degree not in (0, self._grid.n):
            raise DegreeError(f"A {self._degree}-form has {len(self._components)} components")
        return self._components[0]

    def component(self, index: MultiIndex) -> np.ndarray:
        return self._components[_positions(self._grid.n, self._degree)[tuple(index)]]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._components))) if self._components.size else 0.0

    def _check_compatible(self, other: Form):
        self._grid.check_same(other.grid)
        if self._degree != other.degree:
            raise DegreeError(f"Cannot combine a {self._degree}-form with a {other.degree}-form")

    def _scaled(self, factor: FieldLike) -> np.ndarray:
        return self._components * _as_field(self._grid, factor)

    def __add__(self, other: Form) -> Form:
        self._check_compatible(other)
        return Form(self._grid, self._degree, self._components + other.components)

    def __sub__(self, other: Form) -> Form:
        self._check_compatible(other)
        return Form(self._grid, self._degree, self._components - other.components)

    def __neg__(self) -> Form:
        return Form(self._grid, self._degree, -self._components)

    def __mul__(self, factor: FieldLike) -> Form:
        """
        Multiplication by a constant or, pointwise, by a scalar field shaped like the grid
        """
        return Form(self._grid, self._degree, self._scaled(factor))

    __rmul__ = __mul__

    def __truediv__(self, factor: FieldLike) -> Form:
        return Form(self._grid, self._degree, self._components / _as_field(self._grid, factor))

    def __repr__(self) -> str:
        return f"Form(degree={self._degree}, sizes={self._grid.sizes}, max_abs={self.max_abs():.3g})"


class VectorField:
    """
    A vector field on a grid, with its n contravariant components stacked on the first axis
    """

    __slots__ = ("_grid", "_components")

    def __init__(self, grid: Grid, components: Any):
        array = np.array(components, dtype=float)
        if array.shape != (grid.n,) + grid.shape:
            raise ValueError(f"A vector field needs components of shape {(grid.n,) + grid.shape}, got {array.shape}")
        array.flags.writeable = False
        self._grid = grid
        self._components = array

    @classmethod
    def zeros(cls, grid: Grid) -> VectorField:
        return cls(grid, np.zeros((grid.n,) + grid.shape))

    @classmethod
    def coordinate(cls, grid: Grid, axis: int, coefficient: FieldLike = 1.0) -> VectorField:
        """
        The coordinate field ∂_axis (0-based) times a coefficient
        """
        array = np.zeros((grid.n,) + grid.shape)
        array[axis] = _as_field(grid, coefficient)
        return cls(grid, array)

    @property
    def grid(self) -> Grid:
        return self._grid

    @property
    def components(self) -> np.ndarray:
        return self._components

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._components)))

    def __add__(self, other: VectorField) -> VectorField:
        self._grid.check_same(other.grid)
        return VectorField(self._grid, self._components + other.components)

    def __sub__(self, other: VectorField) -> VectorField:
        self._grid.check_same(other.grid)
        return VectorField(self._grid, self._components - other.components)

    def __neg__(self) -> VectorField:
        return VectorField(self._grid, -self._components)

    def __mul__(self, factor: FieldLike) -> VectorField:
        return VectorField(self._grid, self._components * _as_field(self._grid, factor))

    __rmul__ = __mul__

    def __truediv__(self, factor: FieldLike) -> VectorField:
        return VectorField(self._grid, self._components / _as_field(self._grid, factor))

    def __repr__(self) -> str:
        return f"VectorField(sizes={self._grid.sizes}, max_abs={self.max_abs():.3g})"


def centered_difference(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """
    Periodic centered difference (f[j+1] - f[j-1]) / 2h along an axis
    """
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * spacing)


def exterior_derivative(a: Form) -> Form:
    """
    Exterior derivative by centered differences

    :raises DegreeError: When the form has top degree
    """
    grid, k = a.grid, a.degree
    if k >= grid.n:
        raise DegreeError("derivative of top form undefined")
    out = np.zeros((math.comb(grid.n, k + 1),) + grid.shape)
    for source, axis, target, sign in _derivative_table(grid.n, k):
        difference = centered_difference(a.components[source], axis, grid.spacings[axis])
        if sign > 0:
            out[target] += difference
        else:
            out[target] -= difference
    return Form(grid, k + 1, out)


def wedge(a: Form, b: Form) -> Form:
    """
    Pointwise exterior product

    :raises DegreeError: When the sum of the degrees exceeds the dimension
    :raises GridMismatchError: When the forms live on different grids
    """
    a.grid.check_same(b.grid)
    n, k, l = a.grid.n, a.degree, b.degree
    if k + l > n:
        raise DegreeError(f"Wedge of a {k}-form and a {l}-form overflows dimension {n}")
    out = np.zeros((math.comb(n, k + l),) + a.grid.shape)
    for left, right, target, sign in _wedge_table(n, k, l):
        product = a.components[left] * b.components[right]
        if sign > 0:
            out[target] += product
        else:
            out[target] -= product
    return Form(a.grid, k + l, out)


def hodge(a: Form) -> Form:
    """
    Hodge star of the constant diagonal metric, ∗(dx^I) = ±√g Π_{i∈I} g^{ii} dx^{I^c}
    """
    grid, k = a.grid, a.degree
    n = grid.n
    out = np.zeros((math.comb(n, n - k),) + grid.shape)
    positions = _positions(n, n - k)
    for source, index in enumerate(multi_indices(n, k)):
        complement = tuple(i for i in range(n) if i not in index)
        coefficient = permutation_sign(index + complement) * grid.volume_scale
        for i in index:
            coefficient /= grid.metric[i]
        out[positions[complement]] = coefficient * a.components[source]
    return Form(grid, n - k, out)


def volume_form(grid: Grid) -> Form:
    """
    The Riemannian volume form dV = ∗1
    """
    return Form.scalar(grid, grid.volume_scale, degree=grid.n)


def sharp(a: Form) -> VectorField:
    """
    Raise the index of a one-form with the metric
    """
    if a.degree != 1:
        raise DegreeError(f"Only one-forms can be raised, got a {a.degree}-form")
    metric = np.asarray(a.grid.metric).reshape((-1,) + (1,) * a.grid.n)
    return VectorField(a.grid, a.components / metric)


def flat(field: VectorField) -> Form:
    """
    Lower the index of a vector field with the metric
    """
    metric = np.asarray(field.grid.metric).reshape((-1,) + (1,) * field.grid.n)
    return Form(field.grid, 1, field.components * metric)


def interior_product(field: VectorField, a: Form) -> Form:
    """
    Contraction of a form with a vector field in its first slot

    :raises DegreeError: When the form has degree 0
    """
    field.grid.check_same(a.grid)
    grid, k = a.grid, a.degree
    if k == 0:
        raise DegreeError("Interior product of a 0-form is undefined")
    out = np.zeros((math.comb(grid.n, k - 1),) + grid.shape)
    for source, axis, target, sign in _interior_table(grid.n, k):
        product = field.components[axis] * a.components[source]
        if sign > 0:
            out[target] += product
        else:
            out[target] -= product
    return Form(grid, k - 1, out)


def lie_derivative(field: VectorField, a: Form) -> Form:
    """
    Lie derivative defined by Cartan's formula ℒ_X a = i_X da + d i_X a.
    For 0-forms only i_X da remains, for top forms only d i_X a (da is exactly zero there)
    """
    if a.degree == 0:
        return interior_product(field, exterior_derivative(a))
    if a.degree == a.grid.n:
        return exterior_derivative(interior_product(field, a))
    return interior_product(field, exterior_derivative(a)) + exterior_derivative(interior_product(field, a))


def integrate(a: Form) -> float:
    """
    Integral of a top form, summed node by node in row-major (axis-major) order

    :raises DegreeError: When the form is not of top degree
    """
    if a.degree != a.grid.n:
        raise DegreeError(f"Only {a.grid.n}-forms can be integrated, got a {a.degree}-form")
    return a.grid.cell_volume * math.fsum(a.values.ravel(order="C"))


def pairing(a: Form, b: Form) -> float:
    """
    Duality pairing ⟨a, b⟩ = ∫ a ∧ b of forms of complementary degree
    """
    if a.degree + b.degree != a.grid.n:
        raise DegreeError(f"Degrees {a.degree} and {b.degree} are not complementary in dimension {a.grid.n}")
    return integrate(wedge(a, b))


def pairing_magnitude(a: Form, b: Form) -> float:
    """
    ∫ |a ∧ b|, the natural scale of the pairing ⟨a, b⟩ when measuring relative residuals
    """
    product = wedge(a, b)
    return a.grid.cell_volume * math.fsum(np.abs(product.values).ravel(order="C"))


def l2_inner(a: Form, b: Form) -> float:
    """
    Discrete L² product ∫ a ∧ ∗b
    """
    return pairing(a, hodge(b))


def band_limited_field(grid: Grid, rng: np.random.Generator, fraction: int = BAND_FRACTION) -> np.ndarray:
    """
    A random smooth scalar field: a random spectrum restricted to wavenumbers |m| <= size // fraction
    (at least 1) on every axis, normalized to maximum absolute value 1
    """
    spectrum = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    for axis, size in enumerate(grid.shape):
        wavenumbers = np.fft.fftfreq(size, d=1.0 / size)
        keep = np.abs(wavenumbers) <= max(1, size // fraction)
        spectrum = spectrum * keep.reshape([-1 if i == axis else 1 for i in range(grid.n)])
    field = np.real(np.fft.ifftn(spectrum))
    peak = np.max(np.abs(field))
    return field / peak if peak > 0 else field


def random_form(grid: Grid, degree: int, rng: np.random.Generator) -> Form:
    """
    A form with independent band-limited random components
    """
    count = math.comb(grid.n, degree)
    return Form(grid, degree, np.stack([band_limited_field(grid, rng) for _ in range(count)]))


def random_vector_field(grid: Grid, rng: np.random.Generator) -> VectorField:
    return VectorField(grid, np.stack([band_limited_field(grid, rng) for _ in range(grid.n)]))


def _index_key(index: MultiIndex) -> str:
    return ",".join(str(i + 1) for i in index)


def form_to_json(a: Form) -> Dict[str, Any]:
    """
    Snapshot of a form as a JSON serializable dictionary, component keys are 1-based multi-indices like "1,3"
    """
    return {
        "degree": a.degree,
        "sizes": list(a.grid.sizes),
        "spacings": list(a.grid.spacings),
        "metric": list(a.grid.metric),
        "components": {
            _index_key(index): a.components[pos].ravel(order="C").tolist()
            for pos, index in enumerate(multi_indices(a.grid.n, a.degree))
        },
    }


def form_from_json(data: Mapping[str, Any]) -> Form:
    """
    Rebuild a form from :func:`form_to_json` output
    """
    grid = Grid(tuple(data["sizes"]), tuple(data["spacings"]), tuple(data["metric"]))
    degree = int(data["degree"])
    components = {}
    for key, values in data["components"].items():
        index = tuple(int(i) - 1 for i in key.split(",")) if key else ()
        components[index] = np.asarray(values, dtype=float).reshape(grid.shape)
    return Form.from_components(grid, degree, components)
