"""
Curvature tests: frame Riemann and Ricci, coordinate cross-check, stencils
"""

import numpy as np
import pytest

from conftest import ORIGIN, make_context, make_params
from geometry.adapted_frame import lift_frame
from geometry.curvature import (
    CENTRAL,
    RICHARDSON,
    RiemannAt,
    central_derivative,
    coordinate_deviation,
    coordinate_riemann,
    ricci,
    riemann,
)
from geometry.errors import BoundaryError
from geometry.fields import Point
from geometry.kahler_base import flat_base
from geometry.metric import assemble

POINT = (0.3, -0.2, 0.1, 0.5)


def test_minkowski_is_flat():
    """Test constant parameters on the untwisted flat base give R = 0 and Ric = 0"""
    base = flat_base().untwisted()
    params = make_params(base, '1', '1', '0', ('0', '0'))
    curvature = riemann(params, base, POINT)
    np.testing.assert_allclose(curvature.values, 0, atol=1e-12)
    ric = ricci(curvature, assemble(params, base, POINT))
    np.testing.assert_allclose(ric.values, 0, atol=1e-12)
    assert ric.scalar == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('name', ['d0', 'sigma_exp_t', 'gamma_x1', 'warped', 'conformal'])
def test_riemann_symmetries(name):
    """Test antisymmetry, pair exchange and first Bianchi identity"""
    ctx = make_context(name)
    curvature = riemann(ctx.params, ctx.base, POINT)
    residuals = curvature.symmetry_residuals()
    assert max(residuals.values()) <= 1e-6, residuals


@pytest.mark.parametrize('name', ['d0', 'sigma_exp_t', 'warped'])
def test_ricci_is_symmetric(name):
    """Test Ric_AB = Ric_BA"""
    ctx = make_context(name)
    curvature = riemann(ctx.params, ctx.base, POINT)
    ric = ricci(curvature, assemble(ctx.params, ctx.base, POINT))
    assert ric.symmetry_residual <= 1e-6


@pytest.mark.parametrize('name', ['d0', 'sigma_exp_t'])
def test_frame_matches_coordinate_curvature(name):
    """Test the frame Riemann tensor agrees with the coordinate computation"""
    ctx = make_context(name)
    curvature = riemann(ctx.params, ctx.base, POINT)
    coordinate = coordinate_riemann(ctx.params, ctx.base, POINT)
    frame = lift_frame(ctx.base, POINT)
    assert coordinate_deviation(curvature, frame, coordinate) <= 1e-5
    ric = ricci(curvature, assemble(ctx.params, ctx.base, POINT))
    assert ric.scalar == pytest.approx(coordinate.scalar, abs=1e-5)


def test_d0_is_curved():
    """Test the twisted D0 metric is not flat"""
    ctx = make_context('d0')
    curvature = riemann(ctx.params, ctx.base, ORIGIN)
    assert np.max(np.abs(curvature.values)) > 1e-2


def test_central_difference_modes():
    """Test central and Richardson derivatives of sin along a direction"""
    p = Point((0.4, 0.0))
    direction = np.array([1.0, 0.0])

    def func(q):
        return np.array([np.sin(q.coords[0])])

    central = central_derivative(func, p, direction, 1e-3, CENTRAL)
    richardson = central_derivative(func, p, direction, 1e-3, RICHARDSON)
    assert abs(central[0] - np.cos(0.4)) <= 1e-6
    assert abs(richardson[0] - np.cos(0.4)) <= 1e-10
    with pytest.raises(ValueError):
        central_derivative(func, p, direction, 1e-3, 'forward')


def test_stencil_leaving_domain():
    """Test a point within the curvature step of the box edge is rejected"""
    ctx = make_context('d0')
    with pytest.raises(BoundaryError):
        riemann(ctx.params, ctx.base, (9.9995, 0.0, 0.0, 0.0))


def test_riemann_records():
    """Test one record per component with labels A, B, C, D"""
    ctx = make_context('d0')
    records = riemann(ctx.params, ctx.base, ORIGIN).records(point_index=0)
    assert len(records) == 4 ** 4
    assert set(records[0]) == {'A', 'B', 'C', 'D', 'value', 'point'}


def test_ricci_contracts_second_and_last_slot(d0_params, flat):
    """Test Ric_AB = R_ADB^D on a tensor with a single independent entry"""
    metric = assemble(d0_params, flat, ORIGIN)
    values = np.zeros((4, 4, 4, 4))
    values[0, 1, 0, 1] = 1.0
    values[1, 0, 0, 1] = -1.0
    lowered = np.einsum('abce,ed->abcd', values, metric.matrix)
    ric = ricci(RiemannAt(Point(ORIGIN), values, lowered, metric.labels), metric)
    assert ric.values[0, 0] == 1.0
    assert np.count_nonzero(ric.values) == 1
    assert ric.scalar == pytest.approx(1.0)


def test_ricci_matches_entrywise_trace():
    """Test every Ricci component equals the sum of R_ADB^D over D"""
    ctx = make_context('sigma_exp_t')
    curvature = riemann(ctx.params, ctx.base, POINT)
    ric = ricci(curvature, assemble(ctx.params, ctx.base, POINT))
    labels = curvature.labels
    for i, A in enumerate(labels):
        for j, B in enumerate(labels):
            trace = sum(curvature.entry(A, D, B, D) for D in labels)
            assert ric.values[i, j] == pytest.approx(trace, abs=1e-12)
