import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairsafe.dynamics import DynamicsKind
from pairsafe.errors import GridTooCoarse, OutOfBounds
from pairsafe.grid import Axis, FieldKind, GridSpec, ValueField, default_grid, gradient, interpolate, value_and_gradient
from pairsafe.units import parse_quantity

finite = dict(allow_nan=False, allow_infinity=False)


def linear_field(coef=(1.5, -2.0, 0.25), c=0.7):
    spec = GridSpec.from_lists((5, 7, 4), (-1, -2, 0), (1, 2, 3))
    vals = c + sum(a * m for a, m in zip(coef, spec.open_mesh()))
    return ValueField(spec, vals, FieldKind.COOPERATIVE, DynamicsKind.DOUBLE_INTEGRATOR)


def test_axis_nodes_inclusive_and_periodic():
    np.testing.assert_allclose(Axis(5, 0, 1).nodes, [0, 0.25, 0.5, 0.75, 1])
    ax = Axis(4, -np.pi, np.pi, periodic=True)
    assert ax.spacing == pytest.approx(np.pi / 2)
    assert ax.nodes[-1] < np.pi


def test_too_coarse():
    with pytest.raises(GridTooCoarse):
        Axis(2, 0, 1)


def test_shape_mismatch():
    spec = GridSpec.from_lists((3, 3), (0, 0), (1, 1))
    with pytest.raises(ValueError):
        ValueField(spec, np.zeros((3, 4)), FieldKind.COOPERATIVE, DynamicsKind.DOUBLE_INTEGRATOR)


def test_default_grids():
    assert default_grid(DynamicsKind.AIR_TAXI).axes[2].periodic
    assert default_grid(DynamicsKind.DOUBLE_INTEGRATOR).ndim == 4


def test_node_dist():
    spec = GridSpec.from_lists((3, 3, 3), (-1, -1, 0), (1, 1, 1))
    d = spec.node_dist()
    assert d.shape == spec.shape
    assert d[0, 0, 2] == pytest.approx(np.sqrt(2))


@given(st.floats(-1, 1, **finite), st.floats(-2, 2, **finite), st.floats(0, 3, **finite))
def test_interpolation_reproduces_affine(x, y, z):
    f = linear_field()
    assert interpolate(f, (x, y, z)) == pytest.approx(0.7 + 1.5 * x - 2.0 * y + 0.25 * z, abs=1e-12)


@given(st.floats(-0.9, 0.9, **finite), st.floats(-1.9, 1.9, **finite), st.floats(0.1, 2.9, **finite))
def test_gradient_of_affine(x, y, z):
    np.testing.assert_allclose(gradient(linear_field(), (x, y, z)), [1.5, -2.0, 0.25], atol=1e-9)


def test_nodes_are_exact():
    f = linear_field()
    pts = f.spec.states().reshape(-1, 3)
    np.testing.assert_allclose(interpolate(f, pts), f.values.ravel(), atol=1e-12)


def test_batch_shape():
    f = linear_field()
    q = np.zeros((2, 3, 3))
    v, g = value_and_gradient(f, q)
    assert v.shape == (2, 3) and g.shape == (2, 3, 3)
    assert isinstance(interpolate(f, (0, 0, 0)), float)


def test_out_of_bounds_raises_and_clamps():
    f = linear_field()
    with pytest.raises(OutOfBounds) as exc:
        interpolate(f, (1.5, 0, 0))
    assert exc.value.axis == 0
    v, clamped = interpolate(f, (1.5, 0, 0), clamp=True, return_clamped=True)
    assert clamped
    assert v == pytest.approx(interpolate(f, (1.0, 0, 0)))


def test_periodic_wrap():
    spec = GridSpec.from_lists((5, 16), (0, -np.pi), (1, np.pi), periodic=(1,))
    x, th = spec.open_mesh()
    f = ValueField(spec, np.broadcast_to(np.cos(th) + 0 * x, spec.shape), FieldKind.COOPERATIVE, DynamicsKind.AIR_TAXI)
    a = interpolate(f, (0.5, 3.0))
    b = interpolate(f, (0.5, 3.0 - 2 * np.pi))
    c = interpolate(f, (0.5, 3.0 + 4 * np.pi))
    assert a == pytest.approx(b) == pytest.approx(c)
    # across the seam the interpolant blends the last and first node
    seam = interpolate(f, (0.5, np.pi - spec.axes[1].spacing / 2))
    assert seam == pytest.approx(0.5 * (np.cos(np.pi - spec.axes[1].spacing) + np.cos(-np.pi)))


def test_ttr_infinity_does_not_leak():
    spec = GridSpec.from_lists((3,), (0,), (2,))
    f = ValueField(spec, np.array([1.0, 2.0, np.inf]), FieldKind.TIME_TO_REACH, DynamicsKind.DOUBLE_INTEGRATOR)
    assert interpolate(f, (1.0,)) == 2.0
    assert interpolate(f, (0.5,)) == 1.5
    assert interpolate(f, (1.5,)) == np.inf


@pytest.mark.parametrize(
    "text, value, dim",
    [("2200 ft", 670.56, "length"), ("5km", 5000.0, "length"), ("110 kt", 56.584, "speed"),
     ("90 deg", np.pi / 2, "angle"), ("3", 3.0, None), ("2 min", 120.0, "time")],
)
def test_parse_quantity(text, value, dim):
    v, d = parse_quantity(text)
    assert v == pytest.approx(value) and d == dim


def test_parse_quantity_rejects():
    with pytest.raises(ValueError):
        parse_quantity("3 parsecs")
    with pytest.raises(ValueError):
        parse_quantity("1 2 3")
