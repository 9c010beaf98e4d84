"""
Adapted frame tests: lift, bracket table, dual coframe
"""

import numpy as np
import pytest

from conftest import make_params
from geometry.adapted_frame import bracket_table, dual_coframe, frame_labels, label_index, lift_frame
from geometry.errors import InconsistentPotentialError
from geometry.kahler_base import conformal_base, custom_base, flat_base, warped_base
from geometry.metric import assemble

POINT = (0.3, -0.2, 0.1, 0.5)


def test_frame_labels():
    """Test labels run E1..Em, p, q"""
    assert frame_labels(2) == ('E1', 'E2', 'p', 'q')
    assert label_index(frame_labels(4), 'q') == 5
    with pytest.raises(KeyError):
        label_index(frame_labels(2), 'E3')


def test_lift_flat_frame():
    """Test E2 at (0.3, -0.2) lifts to (0, 1, -0.3, 0)"""
    frame = lift_frame(flat_base(), POINT)
    np.testing.assert_allclose(frame.row('E1'), [1, 0, 0, 0])
    np.testing.assert_allclose(frame.row('E2'), [0, 1, -0.3, 0])
    np.testing.assert_allclose(frame.row('p'), [0, 0, 0, 1])
    np.testing.assert_allclose(frame.row('q'), [0, 0, 1, 0])


def test_lift_untwisted_frame_extends_by_zeros():
    """Test A = 0 gives E_i extended by zeros"""
    frame = lift_frame(flat_base().untwisted(), POINT)
    np.testing.assert_array_equal(frame.matrix[:2], [[1, 0, 0, 0], [0, 1, 0, 0]])


def test_flat_bracket_table():
    """Test [E1, E2] = -q on flat C and the measured table agrees"""
    table = bracket_table(flat_base(), POINT)
    assert table.entry('E1', 'E2', 'q') == -1
    assert table.entry('E2', 'E1', 'q') == 1
    assert table.entry('E1', 'p', 'q') == 0
    assert table.deviation <= 1e-12


def test_warped_bracket_table():
    """Test [E1, E2] = E2 - q on the warped base"""
    table = bracket_table(warped_base(), POINT)
    assert table.entry('E1', 'E2', 'E2') == pytest.approx(1.0, abs=1e-14)
    assert table.entry('E1', 'E2', 'q') == pytest.approx(-1.0, abs=1e-14)
    assert table.deviation <= 1e-10


def test_bracket_table_without_measurement():
    """Test verify=False skips the coordinate measurement"""
    table = bracket_table(flat_base(), POINT, verify=False)
    assert table.measured is None
    assert table.deviation is None


def test_inconsistent_potential_is_reported():
    """Test a potential with dA != omega fails the measured comparison"""
    identity = [['1', '0'], ['0', '1']]
    base = custom_base(identity, identity, [['0', '1'], ['-1', '0']], ['0', '0'])
    with pytest.raises(InconsistentPotentialError):
        bracket_table(base, POINT, tolerance=1e-7)


@pytest.mark.parametrize('sigma,beta,gamma', [
    ('1', '0', ('0', '0')),
    ('exp(t)', 'x1*s', ('x2', '1')),
    ('1 + x1^2', '-2', ('0.5', '-x1')),
])
def test_dual_coframe_duality(sigma, beta, gamma):
    """Test theta^A(X_B) = delta and q* = ds + A_mu dx^mu"""
    base = flat_base()
    params = make_params(base, sigma, '2 + cos(x2)', beta, gamma)
    frame = lift_frame(base, POINT)
    coframe = dual_coframe(assemble(params, base, POINT), frame)
    np.testing.assert_allclose(coframe.pairing(frame), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(coframe.matrix[-1], [0, 0.3, 1, 0], atol=1e-12)


def test_dual_coframe_warped():
    """Test duality in a non-coordinate base frame"""
    base = warped_base()
    params = make_params(base, 'exp(s/2)', '1', 'x2', ('1', 'x1'))
    frame = lift_frame(base, POINT)
    coframe = dual_coframe(assemble(params, base, POINT), frame)
    np.testing.assert_allclose(coframe.pairing(frame), np.eye(4), atol=1e-12)
    np.testing.assert_allclose(coframe.matrix[-1, :2], base.potential_vector(POINT), atol=1e-12)


@pytest.mark.parametrize('base', [flat_base(), warped_base(), conformal_base(), flat_base(4), warped_base(4)])
def test_frame_determinant_follows_base_frame(base):
    """Test det(X_A^mu) = -det(E_i^mu): the p, q rows only swap the s, t columns"""
    rng = np.random.default_rng(9)
    for x in rng.uniform(-0.9, 0.9, size=(4, base.dim)):
        p = base.chart.lift(tuple(x))
        frame = lift_frame(base, p)
        expected = -np.linalg.det(base.frame_matrix(p))
        assert np.linalg.det(frame.matrix) == pytest.approx(expected, rel=1e-12)
        assert abs(np.linalg.det(frame.matrix)) > 0
