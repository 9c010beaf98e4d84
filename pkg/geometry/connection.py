"""
Connection
Closed-form Christoffel tables of compatible metrics in the adapted frame.

Three independent paths produce the same table and are compared against each
other: the sigma = 1 table, the conformal transformation law applied to it with
phi = log(sigma)/2, and the full table written directly in sigma.

Layout: values[A, B, C] = Gamma_AB^C with nabla_{X_A} X_B = Gamma_AB^C X_C,
indices over (E1..Em, p, q).
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from .adapted_frame import FrameAt, frame_labels, label_index, lift_frame
from .errors import ParameterError, UnknownFaultError
from .fields import Point, PointLike, ScalarField, log_field
from .kahler_base import BaseFrameData, KahlerBase, base_data
from .metric import MetricAt, MetricParams, assemble, lowered_gamma_fields

logger = logging.getLogger(__name__)

SIGMA1 = 'sigma1'
THEOREM = 'theorem'
CONFORMAL = 'conformal'
ORACLE = 'oracle'
PATHS = (SIGMA1, THEOREM, CONFORMAL, ORACLE)

UNIT_SCALE_TOLERANCE = 1e-12

# the 18 blocks, unordered lower pair
BLOCKS = tuple(f'{pair}^{upper}' for pair in ('ij', 'ip', 'iq', 'pp', 'pq', 'qq') for upper in ('m', 'p', 'q'))


# ============================================================================
# VALUE TYPES
# ============================================================================

def _role(index: int, m: int) -> str:
    return 'i' if index < m else ('p' if index == m else 'q')


def block_of(A: int, B: int, C: int, m: int) -> str:
    """Ordered block name of an entry, e.g. (E1, E2, q) -> 'ij^q', (p, E1, E2) -> 'pi^m'"""
    first, second = _role(A, m), _role(B, m)
    if first == 'i' and second == 'i':
        second = 'j'
    upper = 'm' if C < m else _role(C, m)
    return f'{first}{second}^{upper}'


def block_mask(name: str, m: int) -> np.ndarray:
    n = m + 2
    mask = np.zeros((n, n, n), dtype=bool)
    for A in range(n):
        for B in range(n):
            for C in range(n):
                mask[A, B, C] = block_of(A, B, C, m) == name
    if not mask.any():
        raise KeyError(f"unknown block {name!r}")
    return mask


@dataclass(frozen=True, eq=False)
class ChristoffelTable:
    """Gamma_AB^C at one point, tagged with the path that produced it"""

    values: np.ndarray
    labels: Tuple[str, ...]
    path: str
    point: Optional[Point] = None

    @property
    def m(self) -> int:
        return len(self.labels) - 2

    def entry(self, A: str, B: str, C: str) -> float:
        return float(self.values[label_index(self.labels, A),
                                 label_index(self.labels, B),
                                 label_index(self.labels, C)])

    def covariant_derivative(self, A: str, B: str) -> np.ndarray:
        """Frame components of nabla_{X_A} X_B"""
        return self.values[label_index(self.labels, A), label_index(self.labels, B)].copy()

    def with_values(self, values: np.ndarray, path: Optional[str] = None) -> 'ChristoffelTable':
        return replace(self, values=values, path=path or self.path)

    def deviation(self, other: 'ChristoffelTable') -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def block_deviations(self, other: 'ChristoffelTable') -> Dict[str, float]:
        """Max deviation per ordered block; names the block a discrepancy sits in"""
        diff = np.abs(self.values - other.values)
        m = self.m
        n = m + 2
        result: Dict[str, float] = {}
        for A in range(n):
            for B in range(n):
                for C in range(n):
                    name = block_of(A, B, C, m)
                    result[name] = max(result.get(name, 0.0), float(diff[A, B, C]))
        return result

    def torsion(self, structure: np.ndarray) -> np.ndarray:
        """Gamma_AB^C - Gamma_BA^C - C_AB^C"""
        return self.values - self.values.transpose(1, 0, 2) - structure

    def records(self, point_index: Optional[int] = None) -> List[Dict]:
        """Dense (A, B, C, value, path) records in row-major label order"""
        records = []
        n = len(self.labels)
        for A in range(n):
            for B in range(n):
                for C in range(n):
                    record = {
                        'A': self.labels[A],
                        'B': self.labels[B],
                        'C': self.labels[C],
                        'value': float(self.values[A, B, C]),
                        'path': self.path,
                    }
                    if point_index is not None:
                        record['point'] = point_index
                    records.append(record)
        return records


@dataclass(frozen=True, eq=False)
class STensorAt:
    """S_{ij|k} = (gamma^l / 4)(omega_ik g_lj + omega_jk g_li - omega_ij g_lk)"""

    values: np.ndarray

    @property
    def symmetric_part(self) -> np.ndarray:
        return 0.5 * (self.values + self.values.transpose(1, 0, 2))

    @property
    def antisymmetric_part(self) -> np.ndarray:
        return 0.5 * (self.values - self.values.transpose(1, 0, 2))


@dataclass(frozen=True, eq=False)
class GradientComponents:
    """Frame components of grad phi for the metric of the given parameters"""

    values: np.ndarray
    labels: Tuple[str, ...]

    def as_dict(self) -> Dict[str, float]:
        return {label: float(v) for label, v in zip(self.labels, self.values)}


@dataclass(frozen=True, eq=False)
class ConnectionInputs:
    """Every number the closed forms consume at one point"""

    point: Point
    frame: FrameAt
    data: BaseFrameData
    metric: MetricAt
    d_sigma: np.ndarray          # X_A(sigma)
    d_alpha: np.ndarray
    d_beta: np.ndarray
    d_gamma: np.ndarray          # [A, k] = X_A(gamma^k)
    d_gamma_lowered: np.ndarray  # [A, j] = X_A(gamma^k g_jk)
    s_tensor: np.ndarray

    @property
    def m(self) -> int:
        return self.data.dim

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.frame.labels


# ============================================================================
# INPUTS
# ============================================================================

def _s_values(omega: np.ndarray, gamma_lowered: np.ndarray) -> np.ndarray:
    return 0.25 * (
        np.einsum('ik,j->ijk', omega, gamma_lowered)
        + np.einsum('jk,i->ijk', omega, gamma_lowered)
        - np.einsum('ij,k->ijk', omega, gamma_lowered)
    )


def connection_inputs(params: MetricParams, base: KahlerBase, p: PointLike) -> ConnectionInputs:
    """Evaluate the parameters, base tensors and frame derivatives at p"""
    p = Point.of(p)
    frame = lift_frame(base, p)
    data = base_data(base, p)
    metric = assemble(params, base, p)
    lowered = lowered_gamma_fields(params, base)
    return ConnectionInputs(
        point=p,
        frame=frame,
        data=data,
        metric=metric,
        d_sigma=frame.derivatives(params.sigma),
        d_alpha=frame.derivatives(params.alpha),
        d_beta=frame.derivatives(params.beta),
        d_gamma=np.column_stack([frame.derivatives(g) for g in params.gamma]),
        d_gamma_lowered=np.column_stack([frame.derivatives(f) for f in lowered]),
        s_tensor=_s_values(data.omega, metric.gamma_lowered),
    )


def s_tensor(params: MetricParams, base: KahlerBase, p: PointLike) -> STensorAt:
    p = Point.of(p)
    data = base_data(base, p)
    gamma = np.array([g.eval(p) for g in params.gamma])
    return STensorAt(values=_s_values(data.omega, data.metric @ gamma))


# ============================================================================
# SIGMA = 1 TABLE
# ============================================================================

def _sigma1_values(inp: ConnectionInputs) -> np.ndarray:
    m = inp.m
    P, Q = m, m + 1
    a, b = inp.metric.alpha, inp.metric.beta
    gam = inp.metric.gamma
    g, gi = inp.data.metric, inp.data.metric_inverse
    w, c = inp.data.omega, inp.data.structure
    LS = inp.data.levi_civita_lowered + inp.s_tensor
    gl = g @ gam
    gg = float(gam @ gl)

    Ea, pa, qa = inp.d_alpha[:m], inp.d_alpha[P], inp.d_alpha[Q]
    Eb, pb, qb = inp.d_beta[:m], inp.d_beta[P], inp.d_beta[Q]
    Egl = inp.d_gamma_lowered[:m]
    pg = g @ inp.d_gamma[P]
    qg = g @ inp.d_gamma[Q]
    cgl = np.einsum('ijk,k->ij', c, gl)
    wg = w @ gam
    wgi = w @ gi

    V = np.zeros((m + 2,) * 3)

    V[:m, :m, :m] = np.einsum('mk,ijk->ijm', gi, LS) + np.einsum('m,ij->ijm', gam, w) / 4
    V[:m, :m, P] = ((Egl + Egl.T) / (2 * a) + cgl / (2 * a) - gg * w / (4 * a)
                    - np.einsum('m,ijm->ij', gam, LS) / a)
    V[:m, :m, Q] = -w / 2

    V[:m, P, :m] = a * wgi / 4
    V[:m, P, P] = Ea / (2 * a) + pg / (2 * a) - wg / 4
    V[:m, P, Q] = 0.0
    V[P, :m, :] = V[:m, P, :]

    V[:m, Q, :m] = (np.einsum('mk,ik->im', gi, Egl - Egl.T) / 4
                    - np.einsum('mk,ik->im', gi, cgl) / 4
                    + b * wgi / 4
                    - np.outer(Ea, gam) / (4 * a)
                    + np.outer(pg, gam) / (4 * a))
    V[:m, Q, P] = (Eb / (2 * a)
                   + gg * Ea / (4 * a ** 2) - gg * pg / (4 * a ** 2)
                   - b * Ea / (2 * a ** 2) + b * pg / (2 * a ** 2)
                   - Egl @ gam / (4 * a) + gam @ Egl / (4 * a)
                   + cgl @ gam / (4 * a)
                   - b * wg / (4 * a))
    V[:m, Q, Q] = Ea / (2 * a) - pg / (2 * a)
    V[Q, :m, :] = V[:m, Q, :]

    V[P, P, P] = pa / a

    V[P, Q, :m] = inp.d_gamma[P] / 4 - gi @ Ea / 4
    V[P, Q, P] = pb / (2 * a) - gam @ pg / (4 * a) + gam @ Ea / (4 * a)
    V[P, Q, Q] = 0.0
    V[Q, P, :] = V[P, Q, :]

    V[Q, Q, :m] = inp.d_gamma[Q] / 2 - gi @ Eb / 4 - gam * qa / (2 * a) + gam * pb / (4 * a)
    V[Q, Q, P] = (qb / (2 * a) + gg * qa / (2 * a ** 2) - gg * pb / (4 * a ** 2)
                  - b * qa / a ** 2 + b * pb / (2 * a ** 2)
                  - gam @ qg / (2 * a) + gam @ Eb / (4 * a))
    V[Q, Q, Q] = qa / a - pb / (2 * a)
    return V


def christoffel_sigma1(params: MetricParams, base: KahlerBase, p: PointLike) -> ChristoffelTable:
    """Table for a metric whose conformal factor sigma is identically 1"""
    inp = connection_inputs(params, base, p)
    deviation = max(abs(inp.metric.sigma - 1.0), float(np.max(np.abs(inp.d_sigma))))
    if deviation > UNIT_SCALE_TOLERANCE:
        raise ParameterError(f"sigma is not identically 1 near {inp.point.coords} (deviation {deviation:.3e})")
    return ChristoffelTable(values=_sigma1_values(inp), labels=inp.labels, path=SIGMA1, point=inp.point)


def koszul_closed_form(params: MetricParams, base: KahlerBase, p: PointLike) -> np.ndarray:
    """
    g(nabla_{X_A} X_B, X_C) for sigma = 1 in closed form, the lowered
    counterpart of the sigma = 1 table.
    """
    inp = connection_inputs(params, base, p)
    m = inp.m
    P, Q = m, m + 1
    a, b = inp.metric.alpha, inp.metric.beta
    g = inp.data.metric
    w = inp.data.omega
    gl = g @ inp.metric.gamma
    Ea, pa, qa = inp.d_alpha[:m], inp.d_alpha[P], inp.d_alpha[Q]
    Eb, pb, qb = inp.d_beta[:m], inp.d_beta[P], inp.d_beta[Q]
    Egl = inp.d_gamma_lowered[:m]
    pg = g @ inp.d_gamma[P]
    qg = g @ inp.d_gamma[Q]
    cgl = np.einsum('ijk,k->ij', inp.data.structure, gl)

    K = np.zeros((m + 2,) * 3)
    K[:m, :m, :m] = inp.data.levi_civita_lowered + inp.s_tensor
    K[:m, :m, P] = -a * w / 4
    K[:m, :m, Q] = (Egl + Egl.T) / 4 + cgl / 4 - b * w / 4

    K[:m, P, :m] = a * w / 4
    K[:m, P, Q] = (Ea + pg) / 4
    K[P, :m, :] = K[:m, P, :]

    K[:m, Q, :m] = (Egl - Egl.T) / 4 - cgl / 4 + b * w / 4
    K[:m, Q, P] = (Ea - pg) / 4
    K[:m, Q, Q] = Eb / 4
    K[Q, :m, :] = K[:m, Q, :]

    K[P, P, Q] = pa / 2

    K[P, Q, :m] = (pg - Ea) / 4
    K[P, Q, Q] = pb / 4
    K[Q, P, :] = K[P, Q, :]

    K[Q, Q, :m] = qg / 2 - Eb / 4
    K[Q, Q, P] = qa / 2 - pb / 4
    K[Q, Q, Q] = qb / 4
    return K


# ============================================================================
# CONFORMAL TRANSFORMATION
# ============================================================================

def _gradient_values(d_phi: np.ndarray, metric: MetricAt) -> np.ndarray:
    m = len(metric.labels) - 2
    P, Q = m, m + 1
    a, b, s = metric.alpha, metric.beta, metric.sigma
    gam = metric.gamma
    E_phi, p_phi, q_phi = d_phi[:m], d_phi[P], d_phi[Q]

    grad = np.zeros(m + 2)
    grad[:m] = metric.base_metric_inverse @ E_phi - gam * p_phi / a
    grad[P] = 2 * q_phi / a + (metric.gamma_norm - 2 * b) * p_phi / a ** 2 - gam @ E_phi / a
    grad[Q] = 2 * p_phi / a
    return grad / s


def grad_components(phi: ScalarField, params: MetricParams, base: KahlerBase, p: PointLike) -> GradientComponents:
    """Frame components of grad phi, read off the dual coframe"""
    p = Point.of(p)
    frame = lift_frame(base, p)
    metric = assemble(params, base, p)
    return GradientComponents(values=_gradient_values(frame.derivatives(phi), metric), labels=frame.labels)


def conformal_transform(
    table: ChristoffelTable,
    phi: ScalarField,
    params: MetricParams,
    base: KahlerBase,
    p: PointLike,
) -> ChristoffelTable:
    """
    Table of exp(2 phi) g from the table of g, block by block:

        Gamma'_AB^C = Gamma_AB^C + X_A(phi) delta_B^C + X_B(phi) delta_A^C - G_AB (grad phi)^C
    """
    p = Point.of(p)
    frame = lift_frame(base, p)
    metric = assemble(params, base, p)
    d_phi = frame.derivatives(phi)
    grad = _gradient_values(d_phi, metric)

    m = frame.m
    P, Q = m, m + 1
    G = metric.matrix
    E_phi, p_phi, q_phi = d_phi[:m], d_phi[P], d_phi[Q]
    eye = np.eye(m)
    V = table.values.copy()

    V[:m, :m, :m] += (np.einsum('i,jm->ijm', E_phi, eye) + np.einsum('j,im->ijm', E_phi, eye)
                      - np.einsum('ij,m->ijm', G[:m, :m], grad[:m]))
    V[:m, :m, P] -= G[:m, :m] * grad[P]
    V[:m, :m, Q] -= G[:m, :m] * grad[Q]

    for first, second in ((slice(0, m), P), (P, slice(0, m))):
        V[first, second, :m] += p_phi * eye
        V[first, second, P] += E_phi

    for first, second in ((slice(0, m), Q), (Q, slice(0, m))):
        V[first, second, :m] += q_phi * eye - np.outer(G[:m, Q], grad[:m])
        V[first, second, P] -= G[:m, Q] * grad[P]
        V[first, second, Q] += E_phi - G[:m, Q] * grad[Q]

    V[P, P, P] += 2 * p_phi

    for first, second in ((P, Q), (Q, P)):
        V[first, second, :m] -= G[P, Q] * grad[:m]
        V[first, second, P] += q_phi - G[P, Q] * grad[P]
        V[first, second, Q] += p_phi - G[P, Q] * grad[Q]

    V[Q, Q, :m] -= G[Q, Q] * grad[:m]
    V[Q, Q, P] -= G[Q, Q] * grad[P]
    V[Q, Q, Q] += 2 * q_phi - G[Q, Q] * grad[Q]

    return ChristoffelTable(values=V, labels=table.labels, path=CONFORMAL, point=p)


@lru_cache(maxsize=64)
def half_log(sigma: ScalarField) -> ScalarField:
    return 0.5 * log_field(sigma)


@lru_cache(maxsize=64)
def _unit_scale(params: MetricParams) -> MetricParams:
    return params.with_unit_scale()


def conformal_path(params: MetricParams, base: KahlerBase, p: PointLike) -> ChristoffelTable:
    """sigma = 1 table of the unit-scale parameters, rescaled by phi = log(sigma)/2"""
    unit = _unit_scale(params)
    return conformal_transform(christoffel_sigma1(unit, base, p), half_log(params.sigma), unit, base, p)


# ============================================================================
# FULL TABLE
# ============================================================================

def _theorem_values(inp: ConnectionInputs) -> np.ndarray:
    m = inp.m
    P, Q = m, m + 1
    s, a, b = inp.metric.sigma, inp.metric.alpha, inp.metric.beta
    gam = inp.metric.gamma
    g, gi = inp.data.metric, inp.data.metric_inverse
    w, c = inp.data.omega, inp.data.structure
    LS = inp.data.levi_civita_lowered + inp.s_tensor
    gl = g @ gam
    gg = float(gam @ gl)
    eye = np.eye(m)

    Es, ps, qs = inp.d_sigma[:m], inp.d_sigma[P], inp.d_sigma[Q]
    Ea, pa, qa = inp.d_alpha[:m], inp.d_alpha[P], inp.d_alpha[Q]
    Eb, pb, qb = inp.d_beta[:m], inp.d_beta[P], inp.d_beta[Q]
    Egl = inp.d_gamma_lowered[:m]
    pgam, qgam = inp.d_gamma[P], inp.d_gamma[Q]
    pg = g @ pgam
    qg = g @ qgam
    cgl = np.einsum('ijk,k->ij', c, gl)
    wg = w @ gam
    wgi = w @ gi

    # g^mk E_k(sigma) - (gamma^m / alpha) p(sigma)
    grad_s = gi @ Es - gam * ps / a
    # (2/alpha) q(sigma) + (|gamma|^2 - 2 beta)/alpha^2 p(sigma) - (gamma^m/alpha) E_m(sigma)
    grad_s_p = 2 * qs / a + (gg - 2 * b) * ps / a ** 2 - gam @ Es / a

    V = np.zeros((m + 2,) * 3)

    V[:m, :m, :m] = (np.einsum('mk,ijk->ijm', gi, LS) + np.einsum('m,ij->ijm', gam, w) / 4
                     + (np.einsum('i,jm->ijm', Es, eye) + np.einsum('j,im->ijm', Es, eye)) / (2 * s)
                     - np.einsum('ij,m->ijm', g, grad_s) / (2 * s))
    V[:m, :m, P] = ((Egl + Egl.T) / (2 * a) + cgl / (2 * a) - gg * w / (4 * a)
                    - np.einsum('m,ijm->ij', gam, LS) / a
                    - g * grad_s_p / (2 * s))
    V[:m, :m, Q] = -w / 2 - g * ps / (a * s)

    V[:m, P, :m] = a * wgi / 4 + ps * eye / (2 * s)
    V[:m, P, P] = Ea / (2 * a) + pg / (2 * a) - wg / 4 + Es / (2 * s)
    V[:m, P, Q] = 0.0
    V[P, :m, :] = V[:m, P, :]

    V[:m, Q, :m] = (np.einsum('mk,ik->im', gi, Egl - Egl.T) / 4
                    - np.einsum('mk,ik->im', gi, cgl) / 4
                    + b * wgi / 4
                    - np.outer(Ea, gam) / (4 * a)
                    + np.outer(pg, gam) / (4 * a)
                    + qs * eye / (2 * s)
                    - np.outer(gl, grad_s) / (4 * s))
    V[:m, Q, P] = (Eb / (2 * a)
                   + gg * Ea / (4 * a ** 2) - gg * pg / (4 * a ** 2)
                   - b * Ea / (2 * a ** 2) + b * pg / (2 * a ** 2)
                   - Egl @ gam / (4 * a) + gam @ Egl / (4 * a)
                   + cgl @ gam / (4 * a)
                   - b * wg / (4 * a)
                   - gl * grad_s_p / (4 * s))
    V[:m, Q, Q] = Ea / (2 * a) - pg / (2 * a) + Es / (2 * s) - gl * ps / (2 * a * s)
    V[Q, :m, :] = V[:m, Q, :]

    V[P, P, :m] = 0.0
    V[P, P, P] = pa / a + ps / s
    V[P, P, Q] = 0.0

    V[P, Q, :m] = pgam / 4 - gi @ Ea / 4 - a * grad_s / (4 * s)
    V[P, Q, P] = (pb / (2 * a) - gam @ pg / (4 * a) + gam @ Ea / (4 * a)
                  + qs / (2 * s)
                  - (qs + (gg - 2 * b) * ps / (2 * a) - gam @ Es / 2) / (2 * s))
    V[P, Q, Q] = 0.0
    V[Q, P, :] = V[P, Q, :]

    V[Q, Q, :m] = qgam / 2 - gi @ Eb / 4 - gam * qa / (2 * a) + gam * pb / (4 * a) - b * grad_s / (4 * s)
    V[Q, Q, P] = (qb / (2 * a) + gg * qa / (2 * a ** 2) - gg * pb / (4 * a ** 2)
                  - b * qa / a ** 2 + b * pb / (2 * a ** 2)
                  - gam @ qg / (2 * a) + gam @ Eb / (4 * a)
                  - b * grad_s_p / (4 * s))
    V[Q, Q, Q] = qa / a - pb / (2 * a) + qs / s - b * ps / (2 * a * s)
    return V


def christoffel(params: MetricParams, base: KahlerBase, p: PointLike) -> ChristoffelTable:
    """Full table of the compatible metric with arbitrary sigma > 0"""
    inp = connection_inputs(params, base, p)
    return ChristoffelTable(values=_theorem_values(inp), labels=inp.labels, path=THEOREM, point=inp.point)


# ============================================================================
# FAULT INJECTION
# ============================================================================

def fault_mask(fault: str, m: int) -> np.ndarray:
    """
    Entries a fault corrupts, as a boolean (m+2)^3 mask:
        sign-flip          flips Gamma_{E1 E2}^q
        flip:A,B,C         flips one entry, e.g. flip:E1,p,E2
        flip:<block>       flips an ordered block, e.g. flip:ij^q or flip:qq^q
    """
    if not isinstance(fault, str):
        raise UnknownFaultError(f"expected a fault name, got {fault!r}")
    name = fault.strip()
    if name == 'sign-flip':
        name = 'flip:E1,E2,q'
    if not name.startswith('flip:'):
        raise UnknownFaultError(f"unknown fault {fault!r}; expected sign-flip, flip:A,B,C or flip:<block>")
    target = name[len('flip:'):].strip()
    mask = np.zeros((m + 2,) * 3, dtype=bool)

    if ',' in target:
        labels = frame_labels(m)
        parts = [label.strip() for label in target.split(',')]
        if len(parts) != 3:
            raise UnknownFaultError(f"fault {fault!r} must name three frame labels")
        try:
            index = tuple(label_index(labels, label) for label in parts)
        except KeyError as e:
            raise UnknownFaultError(f"fault {fault!r}: {e.args[0]}") from None
        mask[index] = True
        return mask

    try:
        return block_mask(target, m)
    except KeyError:
        raise UnknownFaultError(f"fault {fault!r}: unknown block {target!r}, e.g. ij^q or pi^m") from None


def inject_fault(table: ChristoffelTable, fault: str) -> ChristoffelTable:
    """Corrupt a table on purpose; see fault_mask for the accepted names"""
    mask = fault_mask(fault, table.m)
    values = table.values.copy()
    values[mask] = -values[mask]
    logger.debug(f"injected fault {fault} into {table.path} table")
    return table.with_values(values)
