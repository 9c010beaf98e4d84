"""
Metric tests: assembly, signature, transversal parameters, nullity
"""

import numpy as np
import pytest

from conftest import ORIGIN, make_params
from geometry.errors import ParameterError
from geometry.kahler_base import conformal_base
from geometry.metric import (
    TransversalParams,
    assemble,
    metric_fields,
    nullity_checks,
    nullity_residuals,
    params_from_transversal,
    round_trip_residual,
    screen_residual,
    transversal_from_params,
)

D0_MATRIX = [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 0.5],
    [0, 0, 0.5, 0],
]


def test_d0_matrix(flat, d0_params):
    """Test D0 assembles to the expected block matrix"""
    metric = assemble(d0_params, flat, ORIGIN)
    np.testing.assert_array_equal(metric.matrix, D0_MATRIX)
    assert metric.labels == ('E1', 'E2', 'p', 'q')


def test_d0_signature(flat, d0_params):
    """Test D0 is Lorentzian with signature (3, 1)"""
    assert assemble(d0_params, flat, ORIGIN).signature() == (3, 1)


def test_gamma_enters_q_row(flat):
    """Test gamma^1 = 1 gives G_qE1 = 1/2, G_qE2 = 0"""
    metric = assemble(make_params(flat, gamma=('1', '0')), flat, ORIGIN)
    assert metric.matrix[3, 0] == 0.5
    assert metric.matrix[0, 3] == 0.5
    assert metric.matrix[3, 1] == 0


def test_sigma_scales_every_entry():
    """Test G = sigma * G(sigma = 1) on a curved base"""
    base = conformal_base()
    p = (0.4, 0.1, -0.3, 0.7)
    unit = assemble(make_params(base, '1', '1.5', 'x1', ('x2', '2')), base, p)
    scaled = assemble(make_params(base, 'exp(t)', '1.5', 'x1', ('x2', '2')), base, p)
    np.testing.assert_allclose(scaled.matrix, np.exp(0.7) * unit.matrix, rtol=1e-14)


def test_non_positive_sigma_and_vanishing_alpha(flat):
    """Test sigma <= 0 and alpha = 0 are rejected"""
    with pytest.raises(ParameterError):
        assemble(make_params(flat, sigma='-1'), flat, ORIGIN)
    with pytest.raises(ParameterError):
        assemble(make_params(flat, alpha='x1'), flat, ORIGIN)


def test_params_from_transversal():
    """Test (a, b, c) -> (alpha, beta, gamma) by substitution"""
    g = np.eye(2)
    alpha, beta, gamma = params_from_transversal(TransversalParams(1, 0, (0, 0)), 1.0, g)
    assert (alpha, beta) == (2, 0)
    np.testing.assert_array_equal(gamma, [0, 0])
    assert params_from_transversal(TransversalParams(2, 0, (0, 0)), 1.0, g)[0] == 1
    assert params_from_transversal(TransversalParams(1, 1, (0, 0)), 1.0, g)[1] == -4


def test_transversal_from_params():
    """Test (alpha, beta, gamma) -> (a, b, c) by substitution"""
    g = np.eye(2)
    t = transversal_from_params(2, 0, [0, 0], 1.0, g)
    assert (t.a, t.b, t.c) == (1, 0, (0, 0))
    t = transversal_from_params(1, 0, [1, 0], 1.0, g)
    assert t.c == (-1, 0)
    assert t.b == pytest.approx(0.5)


def test_transversal_round_trip_random():
    """Test random (a, b, c, sigma) survive the round trip to 1e-12"""
    rng = np.random.default_rng(5)
    for _ in range(50):
        root = rng.normal(size=(2, 2))
        g = root @ root.T + np.eye(2)
        sigma = rng.uniform(0.5, 2.0)
        t = TransversalParams(rng.uniform(0.5, 2.0) * rng.choice([-1, 1]), rng.uniform(-1, 1),
                              tuple(rng.uniform(-1, 1, size=2)))
        back = transversal_from_params(*params_from_transversal(t, sigma, g), sigma, g)
        assert back.a == pytest.approx(t.a, abs=1e-12)
        assert back.b == pytest.approx(t.b, abs=1e-12)
        np.testing.assert_allclose(back.c, t.c, atol=1e-12)


def test_zero_a_is_rejected():
    """Test a = 0 is not a transversal field"""
    with pytest.raises(ParameterError):
        TransversalParams(0, 1, (0, 0))


def test_nullity_d0(flat, d0_params):
    """Test q is null, pairs to 1 with p and is orthogonal to the screen at D0"""
    residuals = nullity_checks(d0_params, flat, ORIGIN)
    assert max(residuals.values()) <= 1e-12


def test_nullity_random_params():
    """Test nullity residuals vanish for non-trivial parameters"""
    base = conformal_base()
    params = make_params(base, '1 + t^2', '2 + sin(x2)', 'x1*s - 1', ('x2', '0.3'))
    for p in [(0.4, 0.1, -0.3, 0.7), (-0.9, 0.5, 0.2, -0.4)]:
        assert max(nullity_checks(params, base, p).values()) <= 1e-10


def test_nullity_detects_wrong_b(flat, d0_params):
    """Test b off by one makes g(q, q) = 2"""
    metric = assemble(d0_params, flat, ORIGIN)
    t = transversal_from_params(metric.alpha, metric.beta, metric.gamma, metric.sigma, metric.base_metric)
    wrong = TransversalParams(t.a, t.b + 1, t.c)
    assert nullity_residuals(metric, wrong)['null'] == pytest.approx(2.0)


def test_screen_and_round_trip_residuals(flat):
    """Test the screen complement and parameter round trip residuals"""
    metric = assemble(make_params(flat, 'exp(x1)', '3', 'x2', ('1', '-2')), flat, (0.3, -0.2, 0.1, 0.5))
    assert screen_residual(metric) <= 1e-14
    assert round_trip_residual(metric) <= 1e-12


def test_metric_fields_match_assembly(flat):
    """Test the symbolic G_BC fields evaluate to the assembled matrix"""
    params = make_params(flat, 'exp(t)', '2 + x1', 's', ('x2', '1'))
    p = (0.3, -0.2, 0.1, 0.5)
    fields = metric_fields(params, flat)
    values = np.array([[f.eval(p) for f in row] for row in fields])
    np.testing.assert_allclose(values, assemble(params, flat, p).matrix, rtol=1e-14, atol=1e-15)
