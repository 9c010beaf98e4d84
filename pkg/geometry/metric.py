"""
Metric
Parameters (sigma, alpha, beta, gamma^i) of a compatible metric, its matrix in
the adapted frame, and the (a, b, c^i) <-> (alpha, beta, gamma^i) conversions.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Sequence, Tuple

import numpy as np

from .adapted_frame import frame_labels
from .errors import InternalInconsistencyError, ParameterError
from .fields import DEFAULT_FD_STEP, EXACT, Chart, Point, PointLike, ScalarField
from .kahler_base import KahlerBase, checked_metric_inverse

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-14
CONDITION_LIMIT = 1e14


@dataclass(frozen=True)
class MetricParams:
    """The scalar fields sigma (> 0), alpha (!= 0), beta and gamma^1..gamma^m"""

    sigma: ScalarField
    alpha: ScalarField
    beta: ScalarField
    gamma: Tuple[ScalarField, ...]

    def __post_init__(self):
        object.__setattr__(self, 'gamma', tuple(self.gamma))

    @classmethod
    def from_expressions(
        cls,
        sigma: str,
        alpha: str,
        beta: str,
        gamma: Sequence[str],
        chart: Chart,
        mode: str = EXACT,
        fd_step: float = DEFAULT_FD_STEP,
    ) -> 'MetricParams':
        def parse(text):
            return ScalarField.parse(str(text), chart, mode, fd_step)

        if len(gamma) != chart.base_dim:
            raise ValueError(f"gamma needs {chart.base_dim} components, got {len(gamma)}")
        return cls(parse(sigma), parse(alpha), parse(beta), tuple(parse(g) for g in gamma))

    @property
    def chart(self) -> Chart:
        return self.sigma.chart

    def with_unit_scale(self) -> 'MetricParams':
        """Same alpha, beta, gamma with sigma replaced by the constant 1"""
        one = ScalarField.constant(1, self.chart, mode=self.sigma.mode, fd_step=self.sigma.fd_step)
        return replace(self, sigma=one)

    def with_mode(self, mode: str, fd_step: float = DEFAULT_FD_STEP) -> 'MetricParams':
        return MetricParams(
            self.sigma.with_mode(mode, fd_step),
            self.alpha.with_mode(mode, fd_step),
            self.beta.with_mode(mode, fd_step),
            tuple(g.with_mode(mode, fd_step) for g in self.gamma),
        )

    def check(self, points: Sequence[PointLike]) -> None:
        """Raise ParameterError unless sigma > 0 and alpha != 0 at every point"""
        for p in points:
            sigma = self.sigma.eval(p)
            if sigma <= 0:
                raise ParameterError(f"sigma = {sigma} is not positive at {Point.of(p).coords}")
            alpha = self.alpha.eval(p)
            if abs(alpha) < ALPHA_FLOOR:
                raise ParameterError(f"alpha vanishes at {Point.of(p).coords}")


@dataclass(frozen=True, eq=False)
class MetricAt:
    """G_AB = g(X_A, X_B) in the adapted frame, with the parameter values it was built from"""

    point: Point
    matrix: np.ndarray
    inverse: np.ndarray
    labels: Tuple[str, ...]
    sigma: float
    alpha: float
    beta: float
    gamma: np.ndarray
    base_metric: np.ndarray
    base_metric_inverse: np.ndarray

    @property
    def gamma_lowered(self) -> np.ndarray:
        return self.base_metric @ self.gamma

    @property
    def gamma_norm(self) -> float:
        return float(self.gamma @ self.base_metric @ self.gamma)

    def signature(self, threshold: float = 1e-12) -> Tuple[int, int]:
        """(positive, negative) eigenvalue counts"""
        eigenvalues = np.linalg.eigvalsh(self.matrix)
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        positive = int(np.sum(eigenvalues > threshold * scale))
        negative = int(np.sum(eigenvalues < -threshold * scale))
        return positive, negative


@dataclass(frozen=True)
class TransversalParams:
    """q = a q_o + b p_o + c^i Ê_i"""

    a: float
    b: float
    c: Tuple[float, ...]

    def __post_init__(self):
        if self.a == 0:
            raise ParameterError("transversal field needs a != 0")
        object.__setattr__(self, 'c', tuple(float(v) for v in self.c))

    def frame_components(self) -> np.ndarray:
        """Components in the order (Ê_1..Ê_m, p_o, q_o)"""
        return np.array(list(self.c) + [self.b, self.a], dtype=float)


# ============================================================================
# OPERATIONS
# ============================================================================

def _metric_entries(sigma: float, alpha: float, beta: float, gamma: np.ndarray, g: np.ndarray) -> np.ndarray:
    m = g.shape[0]
    P, Q = m, m + 1
    G = np.zeros((m + 2, m + 2))
    G[:m, :m] = sigma * g
    G[P, Q] = G[Q, P] = sigma * alpha / 2.0
    G[Q, :m] = G[:m, Q] = sigma * (g @ gamma) / 2.0
    G[Q, Q] = sigma * beta / 2.0
    return G


def assemble(params: MetricParams, base: KahlerBase, p: PointLike) -> MetricAt:
    """
    Compatible metric in the adapted frame:

        G_ij = sigma g_ij     G_ip = G_pp = 0       G_pq = sigma alpha / 2
        G_qi = sigma gamma^k g_ki / 2               G_qq = sigma beta / 2
    """
    p = Point.of(p)
    if len(params.gamma) != base.dim:
        raise ValueError(f"gamma has {len(params.gamma)} components, base dimension is {base.dim}")

    sigma = params.sigma.eval(p)
    if sigma <= 0:
        raise ParameterError(f"sigma = {sigma} is not positive at {p.coords}; not a compatible metric")
    alpha = params.alpha.eval(p)
    if abs(alpha) < ALPHA_FLOOR:
        raise ParameterError(f"alpha vanishes at {p.coords}; q_o is degenerate")
    beta = params.beta.eval(p)
    gamma = np.array([g.eval(p) for g in params.gamma])

    g = base.metric_matrix(p)
    g_inv = checked_metric_inverse(g, p)
    G = _metric_entries(sigma, alpha, beta, gamma, g)

    if np.linalg.cond(G) > CONDITION_LIMIT:
        raise InternalInconsistencyError(f"assembled metric is singular at {p.coords}")
    try:
        G_inv = np.linalg.inv(G)
    except np.linalg.LinAlgError as e:
        raise InternalInconsistencyError(f"assembled metric is singular at {p.coords}: {e}") from e

    return MetricAt(
        point=p,
        matrix=G,
        inverse=G_inv,
        labels=frame_labels(base.dim),
        sigma=sigma,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        base_metric=g,
        base_metric_inverse=g_inv,
    )


def params_from_transversal(
    t: TransversalParams,
    sigma: float,
    g: np.ndarray,
) -> Tuple[float, float, np.ndarray]:
    """alpha = 2/(a sigma), beta = (2/sigma)(-2b/a^2 + sigma c.g.c / a^2), gamma = -2c/a"""
    if sigma <= 0:
        raise ParameterError(f"sigma = {sigma} is not positive")
    a, b = t.a, t.b
    c = np.array(t.c)
    alpha = 2.0 / (a * sigma)
    beta = (2.0 / sigma) * (-2.0 * b / a ** 2 + sigma * float(c @ g @ c) / a ** 2)
    gamma = -2.0 * c / a
    return alpha, beta, gamma


def transversal_from_params(
    alpha: float,
    beta: float,
    gamma: Sequence[float],
    sigma: float,
    g: np.ndarray,
) -> TransversalParams:
    """a = 2/(alpha sigma), b = -beta/(alpha^2 sigma) + gamma.g.gamma/(2 alpha^2 sigma), c = -gamma/(alpha sigma)"""
    if sigma <= 0:
        raise ParameterError(f"sigma = {sigma} is not positive")
    if abs(alpha) < ALPHA_FLOOR:
        raise ParameterError("alpha vanishes")
    gamma = np.asarray(gamma, dtype=float)
    a = 2.0 / (alpha * sigma)
    b = -beta / (alpha ** 2 * sigma) + float(gamma @ g @ gamma) / (2.0 * alpha ** 2 * sigma)
    c = -gamma / (alpha * sigma)
    return TransversalParams(a=a, b=b, c=tuple(c))


def nullity_residuals(metric: MetricAt, t: TransversalParams) -> Dict[str, float]:
    """|g(q,q)|, |g(p_o,q) - 1| and max_i |g(Ê_i,q)| for q built from t"""
    m = len(metric.labels) - 2
    v = t.frame_components()
    Gv = metric.matrix @ v
    return {
        'null': abs(float(v @ Gv)),
        'pairing': abs(float(Gv[m]) - 1.0),
        'screen': float(np.max(np.abs(Gv[:m]))),
    }


def nullity_checks(params: MetricParams, base: KahlerBase, p: PointLike) -> Dict[str, float]:
    metric = assemble(params, base, p)
    t = transversal_from_params(metric.alpha, metric.beta, metric.gamma, metric.sigma, metric.base_metric)
    return nullity_residuals(metric, t)


def screen_residual(metric: MetricAt) -> float:
    """
    How far the G-orthogonal complement of p_o is from span(Ê_i, p_o):
    the q_o-components of an orthonormal basis of p_o's complement.
    """
    m = len(metric.labels) - 2
    _, _, vt = np.linalg.svd(metric.matrix[m:m + 1])
    complement = vt[1:]
    return float(np.max(np.abs(complement[:, m + 1])))


def round_trip_residual(metric: MetricAt) -> float:
    """(alpha, beta, gamma) -> (a, b, c) -> back, relative to the parameter scale"""
    t = transversal_from_params(metric.alpha, metric.beta, metric.gamma, metric.sigma, metric.base_metric)
    alpha, beta, gamma = params_from_transversal(t, metric.sigma, metric.base_metric)
    original = np.concatenate([[metric.alpha, metric.beta], metric.gamma])
    recovered = np.concatenate([[alpha, beta], gamma])
    scale = max(1.0, float(np.max(np.abs(original))))
    return float(np.max(np.abs(original - recovered))) / scale


# ============================================================================
# METRIC SCALAR FIELDS
# ============================================================================

@lru_cache(maxsize=64)
def lowered_gamma_fields(params: MetricParams, base: KahlerBase) -> Tuple[ScalarField, ...]:
    """The product fields gamma^k g_jk, one per j"""
    m = base.dim
    fields = []
    for j in range(m):
        total = params.gamma[0] * base.metric[j][0]
        for k in range(1, m):
            total = total + params.gamma[k] * base.metric[j][k]
        fields.append(total)
    return tuple(fields)


@lru_cache(maxsize=64)
def metric_fields(params: MetricParams, base: KahlerBase) -> Tuple[Tuple[ScalarField, ...], ...]:
    """G_BC as scalar fields on the chart; exact whenever the inputs are"""
    m = base.dim
    n = m + 2
    P, Q = m, m + 1
    zero = ScalarField.constant(0, base.chart, mode=params.sigma.mode, fd_step=params.sigma.fd_step)
    sigma = params.sigma
    lowered = lowered_gamma_fields(params, base)

    table = [[zero] * n for _ in range(n)]
    for i in range(m):
        for j in range(m):
            table[i][j] = sigma * base.metric[i][j]
        table[Q][i] = table[i][Q] = sigma * lowered[i] / 2
    table[P][Q] = table[Q][P] = sigma * params.alpha / 2
    table[Q][Q] = sigma * params.beta / 2
    return tuple(tuple(row) for row in table)
