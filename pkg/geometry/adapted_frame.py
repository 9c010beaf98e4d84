"""
Adapted Frame
The frame (Ê_1..Ê_m, p_o, q_o) on the chart (x, s, t), its bracket table and
the metric-dependent dual coframe.

Realization: Ê_i = E_i - A(E_i) d_s, p_o = d_t, q_o = d_s.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np

from .errors import InconsistentPotentialError
from .fields import Point, PointLike, ScalarField, VectorFieldSpec
from .kahler_base import KahlerBase, base_data, checked_frame

if TYPE_CHECKING:
    from .metric import MetricAt

logger = logging.getLogger(__name__)

P_LABEL = 'p'
Q_LABEL = 'q'


def frame_labels(m: int) -> Tuple[str, ...]:
    """E1..Em, p, q"""
    return tuple(f'E{i + 1}' for i in range(m)) + (P_LABEL, Q_LABEL)


def label_index(labels: Tuple[str, ...], label: str) -> int:
    try:
        return labels.index(label)
    except ValueError:
        raise KeyError(f"unknown frame label {label!r}; expected one of {', '.join(labels)}") from None


@dataclass(frozen=True, eq=False)
class FrameAt:
    """Row A holds the coordinate components of X_A at the point"""

    point: Point
    matrix: np.ndarray
    labels: Tuple[str, ...]

    @property
    def m(self) -> int:
        return len(self.labels) - 2

    @property
    def p_index(self) -> int:
        return self.m

    @property
    def q_index(self) -> int:
        return self.m + 1

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def row(self, label: str) -> np.ndarray:
        return self.matrix[label_index(self.labels, label)]

    def derivatives(self, f: ScalarField) -> np.ndarray:
        """X_A(f) for every frame field, via the coordinate gradient"""
        return self.matrix @ f.gradient(self.point)


@dataclass(frozen=True, eq=False)
class BracketTable:
    """[X_A, X_B] = structure[A, B, C] X_C, plus the coordinate-measured table"""

    point: Point
    structure: np.ndarray
    labels: Tuple[str, ...]
    measured: Optional[np.ndarray] = None

    @property
    def deviation(self) -> Optional[float]:
        if self.measured is None:
            return None
        return float(np.max(np.abs(self.structure - self.measured)))

    def entry(self, A: str, B: str, C: str) -> float:
        return float(self.structure[label_index(self.labels, A),
                                    label_index(self.labels, B),
                                    label_index(self.labels, C)])


@dataclass(frozen=True, eq=False)
class CoframeAt:
    """
    Rows are the coordinate components of the 1-forms (Ê^1..Ê^m, p_o^*, q_o^*).

    frame_components[A, B] = theta^A(X_B) before the change to coordinates.
    """

    point: Point
    matrix: np.ndarray
    frame_components: np.ndarray
    labels: Tuple[str, ...]

    def pairing(self, frame: FrameAt) -> np.ndarray:
        return self.matrix @ frame.matrix.T


# ============================================================================
# OPERATIONS
# ============================================================================

@lru_cache(maxsize=32)
def lifted_frame_fields(base: KahlerBase) -> Tuple[VectorFieldSpec, ...]:
    """Full-chart vector fields Ê_i, p_o, q_o used for coordinate brackets"""
    chart = base.chart
    m = base.dim
    template = base.frame[0].components[0]

    def constant(value: float) -> ScalarField:
        return ScalarField.constant(value, chart, mode=template.mode, fd_step=template.fd_step)

    fields = []
    for i, E in enumerate(base.frame):
        s_component = constant(0)
        if base.twisted:
            for A_mu, E_mu in zip(base.potential, E.components):
                s_component = s_component - A_mu * E_mu
        fields.append(VectorFieldSpec(E.components + (s_component, constant(0)), label=f'E{i + 1}'))

    unit_t = [constant(0) for _ in range(m)] + [constant(0), constant(1)]
    unit_s = [constant(0) for _ in range(m)] + [constant(1), constant(0)]
    fields.append(VectorFieldSpec(tuple(unit_t), label=P_LABEL))
    fields.append(VectorFieldSpec(tuple(unit_s), label=Q_LABEL))
    return tuple(fields)


def lift_frame(base: KahlerBase, p: PointLike) -> FrameAt:
    """Ê_i = (E_i^mu, -A_mu E_i^mu, 0), p_o = d_t, q_o = d_s"""
    p = Point.of(p)
    base.chart.validate(p)
    m = base.dim
    n = m + 2
    F, _ = checked_frame(base, p)
    A = base.potential_vector(p)

    matrix = np.zeros((n, n))
    matrix[:m, :m] = F
    matrix[:m, base.chart.s_index] = -F @ A
    matrix[m, base.chart.t_index] = 1.0
    matrix[m + 1, base.chart.s_index] = 1.0
    return FrameAt(point=p, matrix=matrix, labels=frame_labels(m))


def measured_brackets(base: KahlerBase, p: PointLike) -> np.ndarray:
    """Structure functions recomputed from coordinate derivatives of the frame rows"""
    p = Point.of(p)
    fields = lifted_frame_fields(base)
    n = len(fields)
    F_inv = np.linalg.inv(np.array([X.at(p) for X in fields]))
    measured = np.zeros((n, n, n))
    for a in range(n):
        for b in range(a + 1, n):
            measured[a, b] = fields[a].lie_bracket(fields[b], p) @ F_inv
            measured[b, a] = -measured[a, b]
    return measured


def bracket_table(
    base: KahlerBase,
    p: PointLike,
    verify: bool = True,
    tolerance: Optional[float] = None,
) -> BracketTable:
    """
    Analytic table C_ij^k = c_ij^k, C_ij^q = -omega_ij, everything else zero.

    With verify, the brackets are also measured by coordinate differentiation;
    a deviation above tolerance means the potential does not satisfy dA = omega.
    """
    p = Point.of(p)
    m = base.dim
    n = m + 2
    data = base_data(base, p)
    structure = np.zeros((n, n, n))
    structure[:m, :m, :m] = data.structure
    structure[:m, :m, m + 1] = -data.omega

    measured = measured_brackets(base, p) if verify else None
    table = BracketTable(point=p, structure=structure, labels=frame_labels(m), measured=measured)
    if verify:
        logger.debug(f"bracket deviation {table.deviation:.3e} at {p.coords}")
        if tolerance is not None and table.deviation > tolerance:
            raise InconsistentPotentialError(
                f"measured brackets deviate by {table.deviation:.3e} from the analytic table at {p.coords}; "
                f"check that dA equals the Kähler form"
            )
    return table


def dual_coframe(metric: 'MetricAt', frame: FrameAt) -> CoframeAt:
    """
    Dual coframe by raising with the assembled metric:

        Ê^i   = g(g^ik Ê_k - (gamma^i/alpha) p_o, .) / sigma
        p_o^* = g((2/alpha) q_o + (|gamma|^2 - 2 beta)/alpha^2 p_o - (gamma^m/alpha) Ê_m, .) / sigma
        q_o^* = g((2/alpha) p_o, .) / sigma
    """
    m = frame.m
    P, Q = m, m + 1
    G = metric.matrix
    sigma, alpha, beta = metric.sigma, metric.alpha, metric.beta
    gamma = metric.gamma
    gamma_norm = float(gamma @ metric.base_metric @ gamma)

    rows = np.zeros_like(G)
    rows[:m] = metric.base_metric_inverse @ G[:m] - np.outer(gamma / alpha, G[P])
    rows[P] = (2.0 / alpha) * G[Q] + (gamma_norm - 2.0 * beta) / alpha ** 2 * G[P] - (gamma / alpha) @ G[:m]
    rows[Q] = (2.0 / alpha) * G[P]
    rows /= sigma

    return CoframeAt(
        point=frame.point,
        matrix=rows @ frame.inverse.T,
        frame_components=rows,
        labels=frame.labels,
    )
