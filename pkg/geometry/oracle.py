"""
Oracle
Independent ground truth for the closed-form tables: Koszul's formula with
differentiated metric scalars and measured frame brackets, reconstruction of
Gamma through the dual coframe, and the geometric verification suite.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .adapted_frame import (
    BracketTable,
    FrameAt,
    bracket_table,
    dual_coframe,
    label_index,
    lift_frame,
)
from .connection import (
    CONFORMAL,
    ORACLE,
    SIGMA1,
    THEOREM,
    ChristoffelTable,
    christoffel,
    christoffel_sigma1,
    conformal_path,
    inject_fault,
)
from .curvature import (
    DEFAULT_CURVATURE_STEP,
    RICHARDSON,
    coordinate_deviation,
    coordinate_riemann,
    ricci,
    riemann,
)
from .errors import BoundaryError, EvaluationError, GeometryError, UnknownCheckError
from .fields import DEFAULT_FD_STEP, EXACT, FINITE_DIFFERENCE, Point, PointLike
from .kahler_base import KahlerBase, kahler_residuals, verify_potential
from .metric import (
    MetricAt,
    MetricParams,
    assemble,
    metric_fields,
    nullity_checks,
    round_trip_residual,
    screen_residual,
)

logger = logging.getLogger(__name__)

CORE_CHECKS = (
    'torsion',
    'metricity',
    'oracle-equivalence',
    'geodesic-null',
    'shearfree',
    'coframe-duality',
    'signature',
)
EXTRA_CHECKS = (
    'conformal-path',
    'brackets',
    'potential',
    'kahler',
    'nullity',
    'round-trip',
    'curvature',
    'curvature-coordinate',
)
CHECKS = CORE_CHECKS + EXTRA_CHECKS

EXACT_TOLERANCES = {
    'torsion': 1e-9,
    'metricity': 1e-9,
    'oracle-equivalence': 1e-9,
    'geodesic-null': 1e-9,
    'shearfree': 1e-9,
    'coframe-duality': 1e-10,
    'signature': 0.0,
    'conformal-path': 1e-9,
    'brackets': 1e-10,
    'potential': 1e-10,
    'kahler': 1e-8,
    'nullity': 1e-10,
    'round-trip': 1e-12,
    'curvature': 1e-6,
    'curvature-coordinate': 1e-5,
}
FD_TOLERANCES = dict(
    EXACT_TOLERANCES,
    **{
        'metricity': 1e-6,
        'oracle-equivalence': 1e-6,
        'conformal-path': 1e-6,
        'geodesic-null': 1e-6,
        'shearfree': 1e-6,
        'brackets': 1e-7,
        'potential': 1e-7,
        'kahler': 1e-6,
        'curvature': 1e-4,
        'curvature-coordinate': 1e-4,
    },
)


def default_tolerances(mode: str = EXACT) -> Dict[str, float]:
    return dict(FD_TOLERANCES if mode == FINITE_DIFFERENCE else EXACT_TOLERANCES)


def normalize_checks(checks: Optional[Iterable[str]]) -> Tuple[str, ...]:
    if checks is None:
        return CORE_CHECKS
    names = tuple(dict.fromkeys(c.strip() for c in checks if c.strip()))
    if 'all' in names:
        return CHECKS
    unknown = [c for c in names if c not in CHECKS]
    if unknown:
        raise UnknownCheckError(f"unknown check(s) {', '.join(unknown)}; expected {', '.join(CHECKS)}")
    return names


# ============================================================================
# KOSZUL ORACLE
# ============================================================================

@dataclass(frozen=True)
class KoszulContext:
    """Everything the oracle needs; derivative mode applies to the metric scalars"""

    base: KahlerBase
    params: MetricParams
    mode: str = EXACT
    fd_step: float = DEFAULT_FD_STEP
    richardson: bool = False
    curvature_step: float = DEFAULT_CURVATURE_STEP

    def __post_init__(self):
        if len(self.params.gamma) != self.base.dim:
            raise ValueError(f"gamma has {len(self.params.gamma)} components, base dimension is {self.base.dim}")
        if self.params.chart.dim != self.base.chart.dim:
            raise ValueError("params and base live on charts of different dimension")
        if self.mode not in (EXACT, FINITE_DIFFERENCE):
            raise ValueError(f"unknown derivative mode {self.mode!r}")

    @property
    def n(self) -> int:
        return self.base.dim + 2


def _assembly_derivative(ctx: KoszulContext, p: Point, direction: np.ndarray) -> np.ndarray:
    """X(G_BC) by central differences of the whole assembly at p +/- h X"""
    chart = ctx.base.chart

    def difference(h: float) -> np.ndarray:
        plus, minus = p.displaced(direction, h), p.displaced(direction, -h)
        if not (chart.contains(plus.coords) and chart.contains(minus.coords)):
            raise BoundaryError(f"Koszul difference step {h} leaves the domain box at {p.coords}")
        return (assemble(ctx.params, ctx.base, plus).matrix
                - assemble(ctx.params, ctx.base, minus).matrix) / (2.0 * h)

    coarse = difference(ctx.fd_step)
    if not ctx.richardson:
        return coarse
    return (4.0 * difference(ctx.fd_step / 2.0) - coarse) / 3.0


def metric_derivatives(ctx: KoszulContext, frame: FrameAt) -> np.ndarray:
    """dG[A, B, C] = X_A(G_BC)"""
    n = ctx.n
    p = frame.point
    if ctx.mode == FINITE_DIFFERENCE:
        return np.array([_assembly_derivative(ctx, p, frame.matrix[A]) for A in range(n)])

    fields = metric_fields(ctx.params, ctx.base)
    dG = np.zeros((n, n, n))
    for B in range(n):
        for C in range(B, n):
            dG[:, B, C] = dG[:, C, B] = frame.derivatives(fields[B][C])
    return dG


def koszul_from(dG: np.ndarray, G: np.ndarray, structure: np.ndarray) -> np.ndarray:
    """
    K[A, B, C] = 1/2 [X_A g_BC + X_B g_AC - X_C g_AB
                      - g([A,C],B) - g([B,C],A) + g([A,B],C)]
    """
    gb = np.einsum('abd,dc->abc', structure, G)
    return 0.5 * (
        dG
        + np.einsum('bac->abc', dG)
        - np.einsum('cab->abc', dG)
        - np.einsum('acb->abc', gb)
        - np.einsum('bca->abc', gb)
        + gb
    )


def koszul_tensor(ctx: KoszulContext, p: PointLike) -> np.ndarray:
    """All values g(nabla_{X_A} X_B, X_C), brackets measured from the frame rows"""
    p = Point.of(p)
    frame = lift_frame(ctx.base, p)
    metric = assemble(ctx.params, ctx.base, p)
    brackets = bracket_table(ctx.base, p, verify=True)
    return koszul_from(metric_derivatives(ctx, frame), metric.matrix, brackets.measured)


def koszul(ctx: KoszulContext, A: str, B: str, C: str, p: PointLike) -> float:
    K = koszul_tensor(ctx, p)
    labels = lift_frame(ctx.base, p).labels
    return float(K[label_index(labels, A), label_index(labels, B), label_index(labels, C)])


def reconstruct(K: np.ndarray, metric: MetricAt) -> np.ndarray:
    """
    Gamma_AB^C from the lowered values through the dual coframe:

        Gamma^m = (g^mk K_k - (gamma^m/alpha) K_p) / sigma
        Gamma^p = ((2/alpha) K_q + (|gamma|^2 - 2 beta)/alpha^2 K_p - (gamma^m/alpha) K_m) / sigma
        Gamma^q = (2/alpha) K_p / sigma
    """
    m = len(metric.labels) - 2
    P, Q = m, m + 1
    a, b, s = metric.alpha, metric.beta, metric.sigma
    gam = metric.gamma
    K_E, K_p, K_q = K[:, :, :m], K[:, :, P], K[:, :, Q]

    V = np.zeros_like(K)
    V[:, :, :m] = K_E @ metric.base_metric_inverse - np.einsum('ab,m->abm', K_p, gam) / a
    V[:, :, P] = 2 * K_q / a + (metric.gamma_norm - 2 * b) * K_p / a ** 2 - K_E @ gam / a
    V[:, :, Q] = 2 * K_p / a
    return V / s


def christoffel_oracle(ctx: KoszulContext, p: PointLike) -> ChristoffelTable:
    p = Point.of(p)
    metric = assemble(ctx.params, ctx.base, p)
    return ChristoffelTable(values=reconstruct(koszul_tensor(ctx, p), metric),
                            labels=metric.labels, path=ORACLE, point=p)


# ============================================================================
# VERIFICATION REPORT
# ============================================================================

@dataclass(frozen=True)
class CheckResult:
    """Worst residual of one check; pass iff residual <= tolerance"""

    check: str
    residual: float
    tolerance: float
    point_index: int
    point: Tuple[float, ...]
    worst_indices: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def _rank(self) -> Tuple[float, int]:
        residual = self.residual if math.isfinite(self.residual) else math.inf
        return residual, -self.point_index

    def merge(self, other: 'CheckResult') -> 'CheckResult':
        if other.check != self.check:
            raise ValueError(f"cannot merge {self.check} with {other.check}")
        return self if self._rank() >= other._rank() else other

    def record(self) -> Dict:
        return {
            'check': self.check,
            'residual': self.residual,
            'tolerance': self.tolerance,
            'pass': self.passed,
            'point': list(self.point),
            'point_index': self.point_index,
            'worst_indices': list(self.worst_indices),
        }


@dataclass(frozen=True)
class VerificationReport:
    results: Tuple[CheckResult, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failed(self) -> Tuple[str, ...]:
        return tuple(r.check for r in self.results if not r.passed)

    def result(self, check: str) -> CheckResult:
        for r in self.results:
            if r.check == check:
                return r
        raise KeyError(check)

    def merge(self, other: 'VerificationReport') -> 'VerificationReport':
        merged: Dict[str, CheckResult] = {r.check: r for r in self.results}
        for r in other.results:
            merged[r.check] = merged[r.check].merge(r) if r.check in merged else r
        return VerificationReport(tuple(merged.values()))

    def records(self) -> List[Dict]:
        return [r.record() for r in self.results]


# ============================================================================
# POINTWISE CHECKS
# ============================================================================

def _worst(residuals: np.ndarray, labels: Sequence[str]) -> Tuple[float, Tuple[str, ...]]:
    magnitude = np.abs(residuals)
    if magnitude.size == 0:
        return 0.0, ()
    index = np.unravel_index(int(np.argmax(magnitude)), magnitude.shape)
    return float(magnitude[index]), tuple(labels[i] for i in index)


class PointEvaluation:
    """
    Lazily evaluated quantities at one sample point; each check pulls only what
    it needs.
    """

    def __init__(
        self,
        ctx: KoszulContext,
        p: PointLike,
        index: int = 0,
        table_path: str = THEOREM,
        fault: Optional[str] = None,
    ):
        self.ctx = ctx
        self.point = Point.of(p)
        self.index = index
        self.table_path = table_path
        self.fault = fault

    # ------------------------------------------------------------------------
    # Ingredients
    # ------------------------------------------------------------------------

    @cached_property
    def frame(self) -> FrameAt:
        return lift_frame(self.ctx.base, self.point)

    @cached_property
    def metric(self) -> MetricAt:
        return assemble(self.ctx.params, self.ctx.base, self.point)

    @cached_property
    def brackets(self) -> BracketTable:
        return bracket_table(self.ctx.base, self.point, verify=True)

    @cached_property
    def labels(self) -> Tuple[str, ...]:
        return self.frame.labels

    @cached_property
    def metric_derivatives(self) -> np.ndarray:
        return metric_derivatives(self.ctx, self.frame)

    @cached_property
    def oracle_table(self) -> ChristoffelTable:
        K = koszul_from(self.metric_derivatives, self.metric.matrix, self.brackets.measured)
        return ChristoffelTable(values=reconstruct(K, self.metric), labels=self.labels,
                                path=ORACLE, point=self.point)

    def produce(self, path: str) -> ChristoffelTable:
        params, base = self.ctx.params, self.ctx.base
        if path == THEOREM:
            return christoffel(params, base, self.point)
        if path == SIGMA1:
            return christoffel_sigma1(params, base, self.point)
        if path == CONFORMAL:
            return conformal_path(params, base, self.point)
        if path == ORACLE:
            return self.oracle_table
        raise ValueError(f"unknown table path {path!r}")

    @cached_property
    def table(self) -> ChristoffelTable:
        """The table under test, with any injected fault applied"""
        table = self.produce(self.table_path)
        return inject_fault(table, self.fault) if self.fault else table

    @cached_property
    def riemann(self):
        return riemann(self.ctx.params, self.ctx.base, self.point, RICHARDSON, self.ctx.curvature_step)

    @cached_property
    def ricci(self):
        return ricci(self.riemann, self.metric)

    @cached_property
    def coordinate_curvature(self):
        return coordinate_riemann(self.ctx.params, self.ctx.base, self.point, self.ctx.curvature_step)

    # ------------------------------------------------------------------------
    # Checks
    # ------------------------------------------------------------------------

    def _torsion(self):
        return _worst(self.table.torsion(self.brackets.structure), self.labels)

    def _metricity(self):
        V = self.table.values
        G = self.metric.matrix
        residual = (self.metric_derivatives
                    - np.einsum('abd,dc->abc', V, G)
                    - np.einsum('acd,bd->abc', V, G))
        return _worst(residual, self.labels)

    def _oracle_equivalence(self):
        reference = self.oracle_table if self.table_path != ORACLE else christoffel(
            self.ctx.params, self.ctx.base, self.point)
        return _worst(self.table.values - reference.values, self.labels)

    def _conformal_path(self):
        reference = self.produce(CONFORMAL if self.table_path != CONFORMAL else THEOREM)
        return _worst(self.table.values - reference.values, self.labels)

    def _geodesic_null(self):
        m = self.frame.m
        P, Q = m, m + 1
        d_alpha = self.frame.derivatives(self.ctx.params.alpha)[P]
        d_sigma = self.frame.derivatives(self.ctx.params.sigma)[P]
        expected = np.zeros(m + 2)
        expected[P] = d_alpha / self.metric.alpha + d_sigma / self.metric.sigma
        residual = self.table.values[P, P] - expected
        value, worst = _worst(residual, self.labels)
        null = abs(float(self.metric.matrix[P, P]))
        return (null, ('p', 'p')) if null > value else (value, ('p', 'p') + worst)

    def _shearfree(self):
        W = self.frame.m + 1
        P = self.frame.m
        d_sigma = self.frame.derivatives(self.ctx.params.sigma)[P]
        factor = d_sigma / self.metric.sigma
        residual = self.metric_derivatives[P, :W, :W] - factor * self.metric.matrix[:W, :W]
        return _worst(residual, self.labels)

    def _coframe_duality(self):
        coframe = dual_coframe(self.metric, self.frame)
        pairing = coframe.pairing(self.frame) - np.eye(len(self.labels))
        value, worst = _worst(pairing, self.labels)
        theta = np.concatenate([self.ctx.base.potential_vector(self.point), [1.0, 0.0]])
        contact = float(np.max(np.abs(coframe.matrix[-1] - theta)))
        return (contact, ('q*',)) if contact > value else (value, worst)

    def _signature(self):
        positive, negative = self.metric.signature()
        n = len(self.labels)
        residual = abs(positive - (n - 1)) + abs(negative - 1)
        return float(residual), (f'{positive},{negative}',)

    def _brackets(self):
        return _worst(self.brackets.structure - self.brackets.measured, self.labels)

    def _potential(self):
        return verify_potential(self.ctx.base, [self.point]), ()

    def _kahler(self):
        residuals = kahler_residuals(self.ctx.base, [self.point])
        key = max(residuals, key=residuals.get)
        return residuals[key], (key,)

    def _nullity(self):
        residuals = nullity_checks(self.ctx.params, self.ctx.base, self.point)
        residuals['screen_complement'] = screen_residual(self.metric)
        key = max(residuals, key=residuals.get)
        return residuals[key], (key,)

    def _round_trip(self):
        return round_trip_residual(self.metric), ()

    def _curvature(self):
        residuals = self.riemann.symmetry_residuals()
        residuals['ricci_symmetry'] = self.ricci.symmetry_residual
        key = max(residuals, key=residuals.get)
        return residuals[key], (key,)

    def _curvature_coordinate(self):
        tensor = coordinate_deviation(self.riemann, self.frame, self.coordinate_curvature)
        scalar = abs(self.ricci.scalar - self.coordinate_curvature.scalar)
        return (scalar, ('scalar',)) if scalar > tensor else (tensor, ('riemann',))

    _CHECKS: Dict[str, Callable] = {
        'torsion': _torsion,
        'metricity': _metricity,
        'oracle-equivalence': _oracle_equivalence,
        'geodesic-null': _geodesic_null,
        'shearfree': _shearfree,
        'coframe-duality': _coframe_duality,
        'signature': _signature,
        'conformal-path': _conformal_path,
        'brackets': _brackets,
        'potential': _potential,
        'kahler': _kahler,
        'nullity': _nullity,
        'round-trip': _round_trip,
        'curvature': _curvature,
        'curvature-coordinate': _curvature_coordinate,
    }

    def residual(self, check: str) -> Tuple[float, Tuple[str, ...]]:
        if check not in self._CHECKS:
            raise UnknownCheckError(f"unknown check {check!r}")
        try:
            return self._CHECKS[check](self)
        except EvaluationError:
            raise
        except GeometryError as e:
            raise EvaluationError(
                f"point {self.index} {self.point.coords}: check {check}: {e}",
                point_index=self.index,
                check=check,
            ) from e

    def check_result(self, check: str, tolerance: float) -> CheckResult:
        value, worst = self.residual(check)
        logger.debug(f"point {self.index} {check}: residual {value:.3e} (tolerance {tolerance:.1e})")
        return CheckResult(check=check, residual=value, tolerance=tolerance, point_index=self.index,
                           point=self.point.coords, worst_indices=worst)

    def report(self, checks: Sequence[str], tolerances: Mapping[str, float]) -> VerificationReport:
        return VerificationReport(tuple(self.check_result(c, tolerances[c]) for c in checks))


# ============================================================================
# SWEEP
# ============================================================================

def verify(
    ctx: KoszulContext,
    checks: Optional[Iterable[str]],
    points: Sequence[PointLike],
    tolerances: Optional[Mapping[str, float]] = None,
    table_path: str = THEOREM,
    fault: Optional[str] = None,
    workers: int = 1,
) -> VerificationReport:
    """
    Run the named checks at every point and keep the worst residual per check.
    Points are spread over a thread pool; merging is order-independent.
    """
    names = normalize_checks(checks)
    limits = default_tolerances(ctx.mode)
    limits.update(tolerances or {})

    def run_point(indexed: Tuple[int, PointLike]) -> VerificationReport:
        index, p = indexed
        return PointEvaluation(ctx, p, index, table_path, fault).report(names, limits)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        reports = list(pool.map(run_point, enumerate(points)))

    report = reduce(VerificationReport.merge, reports, VerificationReport())
    status = '✅' if report.passed else '❌'
    logger.info(f"{status} verified {len(names)} check(s) over {len(points)} point(s)")
    return report
