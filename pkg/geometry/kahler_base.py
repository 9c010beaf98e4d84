"""
Kähler Base
Local model of the Kähler base (N, J, g_o) in a chosen frame (E_i) together
with a potential A for the Kähler form, dA = omega_o.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ExpressionError, MetricSignatureError, SingularFrameError
from .fields import (
    DEFAULT_FD_STEP,
    EXACT,
    Chart,
    Point,
    PointLike,
    ScalarField,
    VectorFieldSpec,
)

logger = logging.getLogger(__name__)

FAMILIES = ('flat', 'conformal', 'warped', 'custom')

FRAME_CONDITION_LIMIT = 1e12
SYMMETRY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class KahlerBase:
    """
    Frame-level description of the Kähler base.

    frame[i] holds the m coordinate components of E_i, metric[i][j] = g_o(E_i, E_j),
    complex_structure[i][j] = J_i^j with J E_i = J_i^j E_j, potential[mu] = A_mu.
    An untwisted base drops omega and A; it is not Kähler and only serves tests.
    """

    chart: Chart
    frame: Tuple[VectorFieldSpec, ...]
    metric: Tuple[Tuple[ScalarField, ...], ...]
    complex_structure: Tuple[Tuple[ScalarField, ...], ...]
    potential: Tuple[ScalarField, ...]
    family: str = 'custom'
    twisted: bool = True

    def __post_init__(self):
        m = self.chart.base_dim
        if m < 2 or m % 2:
            raise ValueError(f"dim must be even and at least 2, got {m}")
        object.__setattr__(self, 'frame', tuple(self.frame))
        object.__setattr__(self, 'metric', tuple(tuple(row) for row in self.metric))
        object.__setattr__(self, 'complex_structure', tuple(tuple(row) for row in self.complex_structure))
        object.__setattr__(self, 'potential', tuple(self.potential))

        if len(self.frame) != m or any(E.size != m for E in self.frame):
            raise ValueError(f"frame must hold {m} vector fields with {m} components each")
        for name, table in (('metric', self.metric), ('J', self.complex_structure)):
            if len(table) != m or any(len(row) != m for row in table):
                raise ValueError(f"{name} must be a {m}x{m} table")
        if len(self.potential) != m:
            raise ValueError(f"potential must have {m} components")

        fiber = (self.chart.s_index, self.chart.t_index)
        for f in self._all_fields():
            if any(f.depends_on(k) for k in fiber) and f.is_symbolic:
                raise ExpressionError(f"base field {f.label} depends on the fiber coordinates s, t")

    def _all_fields(self) -> Iterable[ScalarField]:
        for E in self.frame:
            yield from E.components
        for row in self.metric + self.complex_structure:
            yield from row
        yield from self.potential

    @property
    def dim(self) -> int:
        return self.chart.base_dim

    def untwisted(self) -> 'KahlerBase':
        return replace(self, twisted=False)

    def with_mode(self, mode: str, fd_step: float = DEFAULT_FD_STEP) -> 'KahlerBase':
        def convert(row):
            return tuple(f.with_mode(mode, fd_step) for f in row)

        return replace(
            self,
            frame=tuple(VectorFieldSpec(convert(E.components), E.label) for E in self.frame),
            metric=tuple(convert(row) for row in self.metric),
            complex_structure=tuple(convert(row) for row in self.complex_structure),
            potential=convert(self.potential),
        )

    # ------------------------------------------------------------------------
    # Pointwise matrices
    # ------------------------------------------------------------------------

    def frame_matrix(self, p: PointLike) -> np.ndarray:
        """F[i, mu] = E_i^mu"""
        return np.array([E.at(p) for E in self.frame])

    def metric_matrix(self, p: PointLike) -> np.ndarray:
        return np.array([[g.eval(p) for g in row] for row in self.metric])

    def complex_structure_matrix(self, p: PointLike) -> np.ndarray:
        return np.array([[J.eval(p) for J in row] for row in self.complex_structure])

    def potential_vector(self, p: PointLike) -> np.ndarray:
        if not self.twisted:
            return np.zeros(self.dim)
        return np.array([A.eval(p) for A in self.potential])

    def omega_matrix(self, p: PointLike) -> np.ndarray:
        """omega_ij = g_o(J E_i, E_j) = J_i^k g_kj"""
        if not self.twisted:
            return np.zeros((self.dim, self.dim))
        return self.complex_structure_matrix(p) @ self.metric_matrix(p)

    def coordinate_omega(self, p: PointLike) -> np.ndarray:
        """omega in coordinates: omega_mu_nu = (F^-1)_mu^i (F^-1)_nu^j omega_ij"""
        F_inv = np.linalg.inv(self.frame_matrix(p))
        return F_inv @ self.omega_matrix(p) @ F_inv.T

    def potential_differential(self, p: PointLike) -> np.ndarray:
        """(dA)_mu_nu = d_mu A_nu - d_nu A_mu"""
        if not self.twisted:
            return np.zeros((self.dim, self.dim))
        D = np.array([[A.partial(p, mu) for A in self.potential] for mu in range(self.dim)])
        return D - D.T


@dataclass(frozen=True, eq=False)
class BaseFrameData:
    """Frame-level tensors of the base at one point"""

    point: Point
    frame: np.ndarray
    frame_inverse: np.ndarray
    metric: np.ndarray
    metric_inverse: np.ndarray
    omega: np.ndarray
    complex_structure: np.ndarray
    structure: np.ndarray           # c[i, j, k]: [E_i, E_j] = c_ij^k E_k
    metric_derivatives: np.ndarray  # dg[i, j, k] = E_i(g_jk)
    levi_civita_lowered: np.ndarray  # L[i, j, k] = g_o(nabla_Ei Ej, E_k)
    levi_civita: np.ndarray         # Gamma_o[i, j, k], component of nabla_Ei Ej along E_k

    @property
    def dim(self) -> int:
        return self.metric.shape[0]


# ============================================================================
# OPERATIONS
# ============================================================================

def checked_frame(base: KahlerBase, p: Point) -> Tuple[np.ndarray, np.ndarray]:
    F = base.frame_matrix(p)
    try:
        condition = np.linalg.cond(F)
    except np.linalg.LinAlgError:
        condition = np.inf
    if not np.isfinite(condition) or condition > FRAME_CONDITION_LIMIT:
        raise SingularFrameError(f"base frame is singular at {p.coords} (condition number {condition:.3g})")
    return F, np.linalg.inv(F)


def checked_metric_inverse(g: np.ndarray, p: Point) -> np.ndarray:
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOLERANCE:
        raise MetricSignatureError(f"base metric is not symmetric at {p.coords}")
    eigenvalues = np.linalg.eigvalsh(g)
    if eigenvalues[0] <= 0:
        raise MetricSignatureError(
            f"base metric is not positive-definite at {p.coords} (smallest eigenvalue {eigenvalues[0]:.3g})"
        )
    return np.linalg.inv(g)


def frame_structure(base: KahlerBase, p: PointLike, F_inv: Optional[np.ndarray] = None) -> np.ndarray:
    """c[i, j, k] from coordinate derivatives of the frame components"""
    m = base.dim
    if F_inv is None:
        F_inv = np.linalg.inv(base.frame_matrix(p))
    c = np.zeros((m, m, m))
    for i in range(m):
        for j in range(i + 1, m):
            bracket = base.frame[i].lie_bracket(base.frame[j], p)
            c[i, j] = bracket @ F_inv
            c[j, i] = -c[i, j]
    return c


def base_data(base: KahlerBase, x: PointLike) -> BaseFrameData:
    """
    Evaluate every frame-level tensor of the base at x.

    x may be a base point (x1..xm) or a full chart point; the base fields never
    depend on s, t. The Levi-Civita connection of g_o comes from Koszul's formula
    in the frame (E_i).
    """
    p = base.chart.lift(x)
    m = base.dim
    F, F_inv = checked_frame(base, p)
    g = base.metric_matrix(p)
    g_inv = checked_metric_inverse(g, p)
    J = base.complex_structure_matrix(p)
    omega = J @ g if base.twisted else np.zeros((m, m))
    c = frame_structure(base, p, F_inv)

    dg = np.zeros((m, m, m))
    for i in range(m):
        row = np.concatenate([F[i], [0.0, 0.0]])
        for j in range(m):
            for k in range(j, m):
                dg[i, j, k] = dg[i, k, j] = base.metric[j][k].directional(p, row)

    # bracket terms: g([E_i,E_k],E_j) = c_ik^l g_lj
    cg = np.einsum('ikl,lj->ikj', c, g)
    L = 0.5 * (
        dg
        + np.einsum('jik->ijk', dg)
        - np.einsum('kij->ijk', dg)
        - np.einsum('ikj->ijk', cg)
        - np.einsum('jki->ijk', cg)
        + cg
    )
    levi_civita = np.einsum('ijk,kl->ijl', L, g_inv)

    return BaseFrameData(
        point=p,
        frame=F,
        frame_inverse=F_inv,
        metric=g,
        metric_inverse=g_inv,
        omega=omega,
        complex_structure=J,
        structure=c,
        metric_derivatives=dg,
        levi_civita_lowered=L,
        levi_civita=levi_civita,
    )


def verify_potential(base: KahlerBase, samples: Sequence[PointLike]) -> float:
    """Max over samples of |dA - omega| in coordinates"""
    residual = 0.0
    for x in samples:
        p = base.chart.lift(x)
        deviation = np.max(np.abs(base.potential_differential(p) - base.coordinate_omega(p)))
        residual = max(residual, float(deviation))
    logger.debug(f"potential residual {residual:.3e} over {len(samples)} samples")
    return residual


def kahler_residuals(base: KahlerBase, samples: Sequence[PointLike], h: float = 1e-4) -> Dict[str, float]:
    """
    Structure residuals of the base: J^2 = -1, symmetry of g, J-invariance of g,
    antisymmetry of omega and closedness of omega (central differences, step h).
    """
    m = base.dim
    identity = np.eye(m)
    residuals = {
        'complex_structure': 0.0,
        'metric_symmetry': 0.0,
        'hermitian': 0.0,
        'omega_antisymmetry': 0.0,
        'closedness': 0.0,
    }
    for x in samples:
        p = base.chart.lift(x)
        J = base.complex_structure_matrix(p)
        g = base.metric_matrix(p)
        omega = base.omega_matrix(p)
        updates = {
            'complex_structure': np.max(np.abs(J @ J + identity)),
            'metric_symmetry': np.max(np.abs(g - g.T)),
            'hermitian': np.max(np.abs(J @ g @ J.T - g)),
            'omega_antisymmetry': np.max(np.abs(omega + omega.T)),
            'closedness': _closedness_residual(base, p, h) if base.twisted else 0.0,
        }
        for key, value in updates.items():
            residuals[key] = max(residuals[key], float(value))
    return residuals


def _closedness_residual(base: KahlerBase, p: Point, h: float) -> float:
    m = base.dim
    d_omega = np.zeros((m, m, m))
    for lam in range(m):
        step = np.zeros(base.chart.dim)
        step[lam] = 1.0
        d_omega[lam] = (
            base.coordinate_omega(p.displaced(step, h)) - base.coordinate_omega(p.displaced(step, -h))
        ) / (2.0 * h)
    cyclic = d_omega + np.einsum('lmn->mnl', d_omega) + np.einsum('lmn->nlm', d_omega)
    return float(np.max(np.abs(cyclic)))


# ============================================================================
# BUILTIN FAMILIES
# ============================================================================

def _table(texts: Sequence[Sequence[str]], chart: Chart, mode: str, fd_step: float):
    return tuple(tuple(ScalarField.parse(t, chart, mode, fd_step) for t in row) for row in texts)


def _standard_structure(m: int) -> List[List[str]]:
    J = [['0'] * m for _ in range(m)]
    for a in range(0, m, 2):
        J[a][a + 1] = '1'
        J[a + 1][a] = '-1'
    return J


def _identity(m: int, diagonal: str = '1') -> List[List[str]]:
    return [[diagonal if i == j else '0' for j in range(m)] for i in range(m)]


def custom_base(
    frame: Sequence[Sequence[str]],
    metric: Sequence[Sequence[str]],
    J: Sequence[Sequence[str]],
    potential: Sequence[str],
    chart: Optional[Chart] = None,
    mode: str = EXACT,
    fd_step: float = DEFAULT_FD_STEP,
    family: str = 'custom',
) -> KahlerBase:
    """Base from expression tables (rows of frame are E_i)"""
    m = len(frame)
    chart = chart or Chart(m)
    if chart.base_dim != m:
        raise ValueError(f"chart base dimension {chart.base_dim} does not match frame size {m}")
    frame_fields = tuple(
        VectorFieldSpec(row, label=f'E{i + 1}') for i, row in enumerate(_table(frame, chart, mode, fd_step))
    )
    return KahlerBase(
        chart=chart,
        frame=frame_fields,
        metric=_table(metric, chart, mode, fd_step),
        complex_structure=_table(J, chart, mode, fd_step),
        potential=_table([potential], chart, mode, fd_step)[0],
        family=family,
    )


def flat_base(dim: int = 2, chart: Optional[Chart] = None, mode: str = EXACT,
              fd_step: float = DEFAULT_FD_STEP) -> KahlerBase:
    """Flat C^(m/2): coordinate frame, g = delta, standard J, A_{2a} = x_{2a-1}"""
    potential = ['0'] * dim
    for a in range(0, dim, 2):
        potential[a + 1] = f'x{a + 1}'
    return custom_base(_identity(dim), _identity(dim), _standard_structure(dim), potential,
                       chart, mode, fd_step, family='flat')


def conformal_base(u: str = 'x1', potential: Optional[Sequence[str]] = None,
                   chart: Optional[Chart] = None, mode: str = EXACT,
                   fd_step: float = DEFAULT_FD_STEP) -> KahlerBase:
    """
    Conformally flat surface g = exp(2u) delta in the coordinate frame.

    The potential must satisfy d_1 A_2 - d_2 A_1 = exp(2u); the default matches u = x1.
    """
    if potential is None:
        if u.replace(' ', '') != 'x1':
            raise ExpressionError("conformal base needs an explicit potential unless u = x1")
        potential = ['0', 'exp(2*x1)/2']
    factor = f'exp(2*({u}))'
    return custom_base(_identity(2), _identity(2, factor), _standard_structure(2), potential,
                       chart, mode, fd_step, family='conformal')


def warped_base(dim: int = 2, chart: Optional[Chart] = None, mode: str = EXACT,
                fd_step: float = DEFAULT_FD_STEP) -> KahlerBase:
    """
    g = delta in the warped frame E_{2a-1} = d_{2a-1}, E_{2a} = exp(x_{2a-1}) d_{2a}:
    a product of hyperbolic planes dx^2 + exp(-2x) dy^2 with A_{2a} = -exp(-x_{2a-1})
    """
    frame = _identity(dim)
    potential = ['0'] * dim
    for a in range(0, dim, 2):
        frame[a + 1][a + 1] = f'exp(x{a + 1})'
        potential[a + 1] = f'-exp(-x{a + 1})'
    return custom_base(frame, _identity(dim), _standard_structure(dim), potential,
                       chart, mode, fd_step, family='warped')


def build_base(family: str, dim: int = 2, chart: Optional[Chart] = None, mode: str = EXACT,
               fd_step: float = DEFAULT_FD_STEP, **expressions) -> KahlerBase:
    """Dispatch on the family name used by scenario files"""
    if dim < 2 or dim % 2:
        raise ValueError(f"dim must be even and at least 2, got {dim}")
    if family == 'flat':
        return flat_base(dim, chart, mode, fd_step)
    if family == 'warped':
        return warped_base(dim, chart, mode, fd_step)
    if family == 'conformal':
        if dim != 2:
            raise ValueError("conformal family is a surface: dim must be 2")
        return conformal_base(expressions.get('u', 'x1'), expressions.get('potential'), chart, mode, fd_step)
    if family == 'custom':
        missing = [k for k in ('frame', 'metric', 'J', 'potential') if expressions.get(k) is None]
        if missing:
            raise ValueError(f"custom base is missing {', '.join(missing)}")
        return custom_base(expressions['frame'], expressions['metric'], expressions['J'],
                           expressions['potential'], chart, mode, fd_step)
    raise ValueError(f"unknown base family {family!r}; expected one of {', '.join(FAMILIES)}")
