"""
Kähler base tests: frame data, potentials, builtin families
"""

import math

import numpy as np
import pytest

from geometry.errors import ExpressionError, SingularFrameError
from geometry.fields import Chart
from geometry.kahler_base import (
    base_data,
    build_base,
    conformal_base,
    custom_base,
    flat_base,
    kahler_residuals,
    verify_potential,
    warped_base,
)

IDENTITY = [['1', '0'], ['0', '1']]
STANDARD_J = [['0', '1'], ['-1', '0']]
SAMPLES = [(0.0, 0.0), (0.3, -0.2), (-0.8, 0.6)]


def test_flat_base_data():
    """Test flat coordinate frame: no brackets, no connection, standard omega"""
    data = base_data(flat_base(), (0.4, -0.1))
    np.testing.assert_array_equal(data.structure, 0)
    np.testing.assert_array_equal(data.levi_civita, 0)
    assert data.omega[0, 1] == 1
    assert data.omega[1, 0] == -1


def test_warped_frame_structure():
    """Test [E1, E2] = E2 for E2 = exp(x1) d2"""
    data = base_data(warped_base(), (0.2, 0.1))
    assert data.structure[0, 1, 1] == pytest.approx(1.0, abs=1e-14)
    assert data.structure[0, 1, 0] == pytest.approx(0.0, abs=1e-14)
    assert data.structure[1, 0, 1] == pytest.approx(-1.0, abs=1e-14)


def test_warped_levi_civita():
    """Test Koszul connection of the warped frame: nabla_E2 E2 = E1, nabla_E2 E1 = -E2"""
    data = base_data(warped_base(), (0.2, 0.1))
    np.testing.assert_allclose(data.levi_civita[1, 1], [1, 0], atol=1e-13)
    np.testing.assert_allclose(data.levi_civita[1, 0], [0, -1], atol=1e-13)
    np.testing.assert_allclose(data.levi_civita[0], 0, atol=1e-13)


def test_verify_potential_flat():
    """Test A = (0, x1) on flat C gives residual 0"""
    assert verify_potential(flat_base(), SAMPLES) == 0


def test_verify_potential_detects_missing_potential():
    """Test A = 0 with omega != 0 leaves residual max |omega|"""
    base = custom_base(IDENTITY, IDENTITY, STANDARD_J, ['0', '0'])
    assert verify_potential(base, SAMPLES) == pytest.approx(1.0)


def test_verify_potential_gauge_invariant():
    """Test adding d(x1*x2) to the potential changes nothing"""
    base = custom_base(IDENTITY, IDENTITY, STANDARD_J, ['x2', 'x1 + x1'])
    assert verify_potential(base, SAMPLES) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize('base', [warped_base(), conformal_base(), flat_base(4), warped_base(4)])
def test_builtin_potentials(base):
    """Test every builtin family ships a potential with dA = omega"""
    samples = [tuple(0.1 * (k + 1) * (-1) ** k for k in range(base.dim)), (0.0,) * base.dim]
    assert verify_potential(base, samples) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('base', [flat_base(), warped_base(), conformal_base(), flat_base(4)])
def test_kahler_residuals(base):
    """Test J^2 = -1, hermitian metric and closed omega on builtin bases"""
    residuals = kahler_residuals(base, [(0.2,) * base.dim])
    assert max(residuals.values()) == pytest.approx(0.0, abs=1e-8)


def test_flat_higher_dimension_potential():
    """Test flat C^2 uses A_2 = x1, A_4 = x3"""
    base = flat_base(4)
    np.testing.assert_array_equal(base.potential_vector((1, 2, 3, 4, 0, 0)), [0, 1, 0, 3])


def test_conformal_base_default_potential():
    """Test conformal family with u = x1 has A = (0, exp(2 x1)/2)"""
    base = conformal_base()
    np.testing.assert_allclose(base.potential_vector((0.5, 0, 0, 0)), [0, math.exp(1) / 2])
    assert base.metric_matrix((0.5, 0, 0, 0))[1, 1] == pytest.approx(math.e)


def test_conformal_base_needs_potential_for_other_u():
    """Test u other than x1 requires an explicit potential"""
    with pytest.raises(ExpressionError):
        conformal_base('x2')


def test_build_base_rejects_odd_dimension():
    """Test dim must be even"""
    with pytest.raises(ValueError, match='even'):
        build_base('flat', 3)


def test_build_base_unknown_family():
    """Test unknown family names are rejected"""
    with pytest.raises(ValueError, match='unknown base family'):
        build_base('spherical', 2)


def test_base_fields_must_not_depend_on_fiber():
    """Test a metric depending on t is rejected"""
    with pytest.raises(ExpressionError):
        custom_base(IDENTITY, [['exp(t)', '0'], ['0', '1']], STANDARD_J, ['0', 'x1'])


def test_singular_frame():
    """Test degenerate frame is reported"""
    base = custom_base([['x1', '0'], ['0', '1']], IDENTITY, STANDARD_J, ['0', 'x1'])
    with pytest.raises(SingularFrameError):
        base_data(base, (0.0, 0.0))


def test_untwisted_base_drops_omega():
    """Test the untwisted variant has zero omega and potential"""
    base = flat_base().untwisted()
    assert not base.twisted
    np.testing.assert_array_equal(base.omega_matrix((0.3, 0.2, 0, 0)), 0)
    np.testing.assert_array_equal(base.potential_vector((0.3, 0.2, 0, 0)), 0)
    np.testing.assert_array_equal(base_data(base, (0.3, 0.2)).omega, 0)


def test_custom_chart_box():
    """Test a custom domain box is carried by the base"""
    chart = Chart(2, (-1, -1, -1, -1), (1, 1, 1, 1))
    assert flat_base(chart=chart).chart.upper == (1.0, 1.0, 1.0, 1.0)


# ============================================
# LEVI-CIVITA CONNECTION OF THE BASE
# ============================================

def _fd_levi_civita(base, x, h=1e-5):
    """Koszul's formula in the base frame with every derivative by central differences"""
    p = base.chart.lift(x)
    m, n = base.dim, base.chart.dim
    F = base.frame_matrix(p)
    g = base.metric_matrix(p)

    def along(func, direction):
        full = np.concatenate([direction, [0.0, 0.0]])
        return (func(p.displaced(full, h)) - func(p.displaced(full, -h))) / (2 * h)

    dg = np.array([along(base.metric_matrix, F[i]) for i in range(m)])
    dF = np.array([along(base.frame_matrix, np.eye(n)[mu][:m]) for mu in range(m)])
    # [E_i, E_j]^mu = E_i^nu d_nu E_j^mu - E_j^nu d_nu E_i^mu
    brackets = np.einsum('in,njm->ijm', F, dF) - np.einsum('jn,nim->ijm', F, dF)
    c = brackets @ np.linalg.inv(F)
    cg = np.einsum('ijl,lk->ijk', c, g)
    L = 0.5 * (
        dg
        + np.einsum('jik->ijk', dg)
        - np.einsum('kij->ijk', dg)
        + cg
        - np.einsum('jki->ijk', cg)
        + np.einsum('kij->ijk', cg)
    )
    return c, dg, L, np.einsum('ijk,kl->ijl', L, np.linalg.inv(g))


BASES = {
    'flat': flat_base(),
    'warped': warped_base(),
    'warped4': warped_base(4),
    'conformal': conformal_base(),
    'conformal_tilted': conformal_base('x1 + x2/2', ['0', 'exp(2*x1 + x2)/2']),
}


def _base_points(dim):
    return [tuple(row) for row in np.random.default_rng(5).uniform(-0.8, 0.8, size=(4, dim))]


@pytest.mark.parametrize('name', sorted(BASES))
def test_base_connection_is_torsion_free_and_metric(name):
    """Test nabla_Ei Ej - nabla_Ej Ei = [Ei, Ej] and E_i(g_jk) = g(nabla_Ei Ej, Ek) + g(Ej, nabla_Ei Ek)"""
    base = BASES[name]
    for x in _base_points(base.dim):
        data = base_data(base, x)
        c, dg, _, _ = _fd_levi_civita(base, x)
        torsion = data.levi_civita - data.levi_civita.transpose(1, 0, 2) - data.structure
        np.testing.assert_allclose(torsion, 0, atol=1e-12)
        L = data.levi_civita_lowered
        np.testing.assert_allclose(L + L.transpose(0, 2, 1), dg, atol=1e-8)
        np.testing.assert_allclose(data.structure, c, atol=1e-8)


@pytest.mark.parametrize('name', ['conformal', 'conformal_tilted', 'warped4'])
def test_base_connection_matches_finite_difference_koszul(name):
    """Test the base connection against Koszul's formula with numerical derivatives"""
    base = BASES[name]
    for x in _base_points(base.dim):
        _, _, _, levi_civita = _fd_levi_civita(base, x)
        np.testing.assert_allclose(base_data(base, x).levi_civita, levi_civita, atol=1e-8)


def test_conformal_connection_closed_form():
    """Test Gamma_ij^k = delta_ik u_j + delta_jk u_i - delta_ij u_k for g = exp(2u) delta"""
    du = np.array([1.0, 0.5])
    expected = np.einsum('ik,j->ijk', np.eye(2), du) + np.einsum('jk,i->ijk', np.eye(2), du) \
        - np.einsum('ij,k->ijk', np.eye(2), du)
    data = base_data(BASES['conformal_tilted'], (0.3, -0.4))
    np.testing.assert_allclose(data.levi_civita, expected, atol=1e-13)
