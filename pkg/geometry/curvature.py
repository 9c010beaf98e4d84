"""
Curvature
Riemann and Ricci components in the adapted frame from a Christoffel table,
and an independent coordinate-frame computation used as a cross-check.

R(X_A, X_B) X_C = R_ABC^D X_D with
    R_ABC^D = X_A(Gamma_BC^D) - X_B(Gamma_AC^D) + Gamma_BC^E Gamma_AE^D
              - Gamma_AC^E Gamma_BE^D - C_AB^E Gamma_EC^D
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .adapted_frame import FrameAt, bracket_table, label_index, lift_frame
from .connection import ChristoffelTable, christoffel
from .errors import BoundaryError
from .fields import Chart, Point, PointLike
from .kahler_base import KahlerBase
from .metric import MetricAt, MetricParams, assemble

logger = logging.getLogger(__name__)

CENTRAL = 'central'
RICHARDSON = 'richardson'
DIFFERENCE_MODES = (CENTRAL, RICHARDSON)

DEFAULT_CURVATURE_STEP = 1e-3
DEFAULT_INNER_STEP = 1e-4

TableProducer = Callable[[MetricParams, KahlerBase, PointLike], ChristoffelTable]


@dataclass(frozen=True, eq=False)
class RiemannAt:
    """values[A, B, C, D] = R_ABC^D, lowered[A, B, C, D] = g(R(X_A, X_B) X_C, X_D)"""

    point: Point
    values: np.ndarray
    lowered: np.ndarray
    labels: tuple

    def entry(self, A: str, B: str, C: str, D: str) -> float:
        index = tuple(label_index(self.labels, label) for label in (A, B, C, D))
        return float(self.values[index])

    def symmetry_residuals(self) -> Dict[str, float]:
        L = self.lowered
        bianchi = L + np.einsum('bcad->abcd', L) + np.einsum('cabd->abcd', L)
        return {
            'antisymmetry_ab': float(np.max(np.abs(L + L.transpose(1, 0, 2, 3)))),
            'antisymmetry_cd': float(np.max(np.abs(L + L.transpose(0, 1, 3, 2)))),
            'pair_exchange': float(np.max(np.abs(L - L.transpose(2, 3, 0, 1)))),
            'bianchi': float(np.max(np.abs(bianchi))),
        }

    def in_coordinates(self, frame: FrameAt) -> np.ndarray:
        """Lowered components on the coordinate fields d_mu"""
        F_inv = frame.inverse
        return np.einsum('ma,nb,rc,sd,abcd->mnrs', F_inv, F_inv, F_inv, F_inv, self.lowered)

    def records(self, point_index: Optional[int] = None) -> List[Dict]:
        n = len(self.labels)
        records = []
        for index in np.ndindex(n, n, n, n):
            record = {key: self.labels[i] for key, i in zip('ABCD', index)}
            record['value'] = float(self.values[index])
            if point_index is not None:
                record['point'] = point_index
            records.append(record)
        return records


@dataclass(frozen=True, eq=False)
class RicciAt:
    """Ric_AB = R_ADB^D and the scalar G^AB Ric_AB"""

    values: np.ndarray
    scalar: float
    labels: tuple

    @property
    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T)))

    def records(self, point_index: Optional[int] = None) -> List[Dict]:
        n = len(self.labels)
        records = []
        for A in range(n):
            for B in range(n):
                record = {'A': self.labels[A], 'B': self.labels[B], 'value': float(self.values[A, B])}
                if point_index is not None:
                    record['point'] = point_index
                records.append(record)
        return records


@dataclass(frozen=True, eq=False)
class CoordinateCurvature:
    """Curvature of the coordinate metric g_mu_nu, computed without the frame"""

    point: Point
    metric: np.ndarray
    christoffel: np.ndarray
    values: np.ndarray
    lowered: np.ndarray
    scalar: float


# ============================================================================
# DIFFERENCING
# ============================================================================

def _check_stencil(chart: Chart, p: Point, direction: np.ndarray, reach: float) -> None:
    for sign in (1.0, -1.0):
        if not chart.contains(p.displaced(direction, sign * reach).coords):
            raise BoundaryError(f"curvature stencil of width {reach} leaves the domain box at {p.coords}")


def central_derivative(
    func: Callable[[Point], np.ndarray],
    p: Point,
    direction: np.ndarray,
    step: float,
    mode: str = RICHARDSON,
) -> np.ndarray:
    """Derivative of func along a fixed direction; Richardson combines steps h and h/2"""
    if mode not in DIFFERENCE_MODES:
        raise ValueError(f"unknown difference mode {mode!r}")

    def difference(h: float) -> np.ndarray:
        return (func(p.displaced(direction, h)) - func(p.displaced(direction, -h))) / (2.0 * h)

    coarse = difference(step)
    if mode == CENTRAL:
        return coarse
    return (4.0 * difference(step / 2.0) - coarse) / 3.0


def curvature_from_connection(d_gamma: np.ndarray, gamma: np.ndarray, structure: np.ndarray) -> np.ndarray:
    """d_gamma[A, B, C, D] = X_A(Gamma_BC^D)"""
    return (
        d_gamma
        - d_gamma.transpose(1, 0, 2, 3)
        + np.einsum('bce,aed->abcd', gamma, gamma)
        - np.einsum('ace,bed->abcd', gamma, gamma)
        - np.einsum('abe,ecd->abcd', structure, gamma)
    )


# ============================================================================
# FRAME CURVATURE
# ============================================================================

def riemann(
    params: MetricParams,
    base: KahlerBase,
    p: PointLike,
    mode: str = RICHARDSON,
    step: float = DEFAULT_CURVATURE_STEP,
    table: TableProducer = christoffel,
) -> RiemannAt:
    """
    Riemann tensor in the adapted frame. X_A(Gamma) is differenced along the
    frame row of X_A at p.
    """
    p = Point.of(p)
    frame = lift_frame(base, p)
    brackets = bracket_table(base, p, verify=False)
    metric = assemble(params, base, p)
    gamma = table(params, base, p).values
    n = gamma.shape[0]

    def values_at(q: Point) -> np.ndarray:
        return table(params, base, q).values

    d_gamma = np.zeros((n,) * 4)
    for A in range(n):
        _check_stencil(base.chart, p, frame.matrix[A], step)
        d_gamma[A] = central_derivative(values_at, p, frame.matrix[A], step, mode)

    values = curvature_from_connection(d_gamma, gamma, brackets.structure)
    lowered = np.einsum('abce,ed->abcd', values, metric.matrix)
    return RiemannAt(point=p, values=values, lowered=lowered, labels=frame.labels)


def ricci(riemann_at: RiemannAt, metric: MetricAt) -> RicciAt:
    values = np.einsum('adbd->ab', riemann_at.values)
    scalar = float(np.einsum('bc,bc->', metric.inverse, values))
    return RicciAt(values=values, scalar=scalar, labels=riemann_at.labels)


# ============================================================================
# COORDINATE CROSS-CHECK
# ============================================================================

def coordinate_metric(params: MetricParams, base: KahlerBase, p: PointLike) -> np.ndarray:
    """g_mu_nu = (F^-1)_mu^A G_AB (F^-1)_nu^B"""
    frame = lift_frame(base, p)
    G = assemble(params, base, p).matrix
    return frame.inverse @ G @ frame.inverse.T


def coordinate_christoffel(params: MetricParams, base: KahlerBase, p: PointLike,
                           step: float = DEFAULT_INNER_STEP) -> np.ndarray:
    """Gamma[mu, nu, lam] with nabla_{d_mu} d_nu = Gamma[mu, nu, lam] d_lam"""
    p = Point.of(p)
    n = base.chart.dim
    g = coordinate_metric(params, base, p)
    dg = np.zeros((n, n, n))
    for lam in range(n):
        e = np.zeros(n)
        e[lam] = 1.0
        _check_stencil(base.chart, p, e, step)
        dg[lam] = central_derivative(lambda q: coordinate_metric(params, base, q), p, e, step, CENTRAL)
    lowered = 0.5 * (dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0))
    return np.einsum('mnk,kl->mnl', lowered, np.linalg.inv(g))


def coordinate_riemann(
    params: MetricParams,
    base: KahlerBase,
    p: PointLike,
    step: float = DEFAULT_CURVATURE_STEP,
    inner_step: float = DEFAULT_INNER_STEP,
) -> CoordinateCurvature:
    """Riemann tensor of g_mu_nu by nested central differences"""
    p = Point.of(p)
    n = base.chart.dim
    g = coordinate_metric(params, base, p)
    gamma = coordinate_christoffel(params, base, p, inner_step)

    d_gamma = np.zeros((n,) * 4)
    for mu in range(n):
        e = np.zeros(n)
        e[mu] = 1.0
        _check_stencil(base.chart, p, e, step + inner_step)
        d_gamma[mu] = central_derivative(
            lambda q: coordinate_christoffel(params, base, q, inner_step), p, e, step, RICHARDSON
        )

    values = curvature_from_connection(d_gamma, gamma, np.zeros((n, n, n)))
    lowered = np.einsum('abce,ed->abcd', values, g)
    ric = np.einsum('adbd->ab', values)
    scalar = float(np.einsum('bc,bc->', np.linalg.inv(g), ric))
    return CoordinateCurvature(point=p, metric=g, christoffel=gamma, values=values, lowered=lowered, scalar=scalar)


def coordinate_deviation(riemann_at: RiemannAt, frame: FrameAt, coordinate: CoordinateCurvature) -> float:
    """Max difference between the transported frame tensor and the coordinate one"""
    return float(np.max(np.abs(riemann_at.in_coordinates(frame) - coordinate.lowered)))
