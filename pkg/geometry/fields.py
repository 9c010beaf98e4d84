"""
Fields
Scalar and vector fields on the chart (x1..xm, s, t) of the optical manifold.

Expression-backed fields are parsed with sympy and differentiated exactly;
opaque callables fall back to central finite differences.
"""

import logging
import math
import numbers
import operator
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .errors import (
    BoundaryError,
    DomainError,
    ExpressionError,
    GeometryError,
    NonDifferentiableError,
    NonFiniteError,
)

logger = logging.getLogger(__name__)

EXACT = 'exact'
FINITE_DIFFERENCE = 'fd'
DERIVATIVE_MODES = (EXACT, FINITE_DIFFERENCE)

DEFAULT_FD_STEP = 1e-5
DEFAULT_HALF_WIDTH = 10.0

_ALLOWED_TEXT = re.compile(r'^[0-9A-Za-z_+\-*/^().\s]*$')
_TRANSFORMATIONS = standard_transformations + (convert_xor,)
_FUNCTIONS = {
    'exp': sp.exp,
    'log': sp.log,
    'sin': sp.sin,
    'cos': sp.cos,
    'sqrt': sp.sqrt,
}
_FUNCTION_CLASSES = (sp.exp, sp.log, sp.sin, sp.cos, sp.Abs)


# ============================================================================
# CHART AND POINTS
# ============================================================================

@dataclass(frozen=True)
class Point:
    """Coordinates (x1..xm, s, t) of a point on the chart"""

    coords: Tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in np.asarray(self.coords, dtype=float).ravel())
        if not all(math.isfinite(c) for c in coords):
            raise DomainError(f"Point has non-finite coordinates: {coords}")
        object.__setattr__(self, 'coords', coords)

    @classmethod
    def of(cls, value: Union['Point', Sequence[float], np.ndarray]) -> 'Point':
        return value if isinstance(value, Point) else cls(tuple(value))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def displaced(self, direction: Sequence[float], h: float) -> 'Point':
        return Point(tuple(self.array + h * np.asarray(direction, dtype=float)))


PointLike = Union[Point, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Chart:
    """
    Coordinate chart of dimension n = base_dim + 2 with a declared box.

    Evaluation outside [lower, upper] is an error, never an extrapolation.
    """

    base_dim: int
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if int(self.base_dim) < 1:
            raise ValueError(f"base dimension must be positive, got {self.base_dim}")
        n = int(self.base_dim) + 2
        lower = (-DEFAULT_HALF_WIDTH,) * n if self.lower is None else tuple(float(v) for v in self.lower)
        upper = (DEFAULT_HALF_WIDTH,) * n if self.upper is None else tuple(float(v) for v in self.upper)
        if len(lower) != n or len(upper) != n:
            raise DomainError(f"domain box must have {n} bounds per side")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise DomainError(f"domain box is empty: lower={lower} upper={upper}")
        object.__setattr__(self, 'base_dim', int(self.base_dim))
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def dim(self) -> int:
        return self.base_dim + 2

    @property
    def s_index(self) -> int:
        return self.base_dim

    @property
    def t_index(self) -> int:
        return self.base_dim + 1

    @cached_property
    def coordinate_names(self) -> Tuple[str, ...]:
        return tuple(f'x{i + 1}' for i in range(self.base_dim)) + ('s', 't')

    @cached_property
    def symbols(self) -> Tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(name, real=True) for name in self.coordinate_names)

    def contains(self, coords: Sequence[float]) -> bool:
        return all(lo <= c <= hi for c, lo, hi in zip(coords, self.lower, self.upper))

    def validate(self, p: PointLike) -> Tuple[float, ...]:
        """Return the coordinates of p, raising DomainError unless p is in the box"""
        coords = Point.of(p).coords
        if len(coords) != self.dim:
            raise DomainError(f"point has {len(coords)} coordinates, chart dimension is {self.dim}")
        if not self.contains(coords):
            raise DomainError(f"point {coords} lies outside the domain box")
        return coords

    def lift(self, x: PointLike) -> Point:
        """Promote a base point (x1..xm) to a chart point with s = t = 0"""
        coords = Point.of(x).coords
        if len(coords) == self.base_dim:
            coords = coords + (0.0, 0.0)
        return Point(coords)


# ============================================================================
# EXPRESSION HELPERS
# ============================================================================

def _positivity_guards(expr: sp.Expr) -> List[sp.Expr]:
    """Arguments of log, bases of non-integer powers and squared Abs arguments, innermost first"""
    guards = []
    for node in sp.postorder_traversal(expr):
        if isinstance(node, sp.log):
            candidate = node.args[0]
        elif isinstance(node, sp.Abs):
            candidate = node.args[0] ** 2
        elif isinstance(node, sp.Pow) and not node.exp.is_integer:
            candidate = node.base
        else:
            continue
        if candidate.is_positive is not True:
            guards.append(candidate)
    return guards


def _merge_guards(*groups: Iterable[sp.Expr]) -> Tuple[sp.Expr, ...]:
    merged: Dict[sp.Expr, None] = {}
    for group in groups:
        for guard in group:
            merged.setdefault(guard, None)
    return tuple(merged)


def _parse(text: str, chart: Chart) -> sp.Expr:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression is empty")
    if not _ALLOWED_TEXT.match(text):
        raise ExpressionError(f"expression {text!r} contains forbidden characters")

    local_dict = dict(zip(chart.coordinate_names, chart.symbols))
    local_dict.update(_FUNCTIONS)
    local_dict['pi'] = sp.pi
    local_dict['e'] = sp.E
    global_dict = {
        'Integer': sp.Integer,
        'Float': sp.Float,
        'Rational': sp.Rational,
        'Symbol': sp.Symbol,
    }
    try:
        expr = parse_expr(
            text.strip(),
            local_dict=local_dict,
            global_dict=global_dict,
            transformations=_TRANSFORMATIONS,
        )
    except Exception as e:
        raise ExpressionError(f"cannot parse {text!r}: {e}") from e

    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"{text!r} is not a scalar expression")
    unknown = sorted(str(s) for s in expr.free_symbols - set(chart.symbols))
    if unknown:
        raise ExpressionError(
            f"{text!r} uses unknown symbol(s) {', '.join(unknown)}; "
            f"allowed: {', '.join(chart.coordinate_names)}"
        )
    for node in expr.atoms(sp.Function):
        if not isinstance(node, _FUNCTION_CLASSES):
            raise ExpressionError(f"{text!r} uses unsupported function {node.func}")
    if expr.has(sp.I, sp.zoo, sp.oo, sp.nan):
        raise ExpressionError(f"{text!r} is not a finite real expression")
    return expr


# ============================================================================
# SCALAR FIELDS
# ============================================================================

class ScalarField:
    """
    Smooth real function on a chart.

    Backed either by a sympy expression (exact partials via sympy.diff) or by an
    opaque callable taking the coordinate tuple (central differences with step
    fd_step). An expression-backed field may also be put in finite-difference
    mode with with_mode().
    """

    def __init__(
        self,
        chart: Chart,
        expr: Optional[sp.Expr] = None,
        func: Optional[Callable[[Tuple[float, ...]], float]] = None,
        mode: str = EXACT,
        fd_step: float = DEFAULT_FD_STEP,
        guards: Iterable[sp.Expr] = (),
        label: Optional[str] = None,
    ):
        if (expr is None) == (func is None):
            raise ValueError("ScalarField needs exactly one of expr or func")
        if mode not in DERIVATIVE_MODES:
            raise ValueError(f"unknown derivative mode {mode!r}")
        if not (fd_step > 0 and math.isfinite(fd_step)):
            raise ValueError(f"finite-difference step must be positive, got {fd_step}")

        self.chart = chart
        self.expr = sp.sympify(expr) if expr is not None else None
        self.func = func
        self.mode = FINITE_DIFFERENCE if func is not None else mode
        self.fd_step = float(fd_step)
        own = _positivity_guards(self.expr) if self.expr is not None else ()
        self.guards = _merge_guards(guards, own)
        if label is None:
            label = str(self.expr) if self.expr is not None else getattr(func, '__name__', '<callable>')
        self.label = label

    # ------------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------------

    @classmethod
    def parse(
        cls,
        text: str,
        chart: Chart,
        mode: str = EXACT,
        fd_step: float = DEFAULT_FD_STEP,
    ) -> 'ScalarField':
        """Parse infix text such as "exp(2*x1)/2" or "x1^2 + s" """
        return cls(chart, expr=_parse(text, chart), mode=mode, fd_step=fd_step, label=text.strip())

    @classmethod
    def constant(
        cls,
        value: float,
        chart: Chart,
        mode: str = EXACT,
        fd_step: float = DEFAULT_FD_STEP,
    ) -> 'ScalarField':
        return cls(chart, expr=sp.sympify(value), mode=mode, fd_step=fd_step)

    @classmethod
    def from_callable(
        cls,
        func: Callable[[Tuple[float, ...]], float],
        chart: Chart,
        fd_step: float = DEFAULT_FD_STEP,
        label: Optional[str] = None,
    ) -> 'ScalarField':
        return cls(chart, func=func, mode=FINITE_DIFFERENCE, fd_step=fd_step, label=label)

    def with_mode(self, mode: str, fd_step: Optional[float] = None) -> 'ScalarField':
        step = self.fd_step if fd_step is None else fd_step
        if self.expr is None:
            return ScalarField(self.chart, func=self.func, fd_step=step, label=self.label)
        return ScalarField(self.chart, expr=self.expr, mode=mode, fd_step=step,
                           guards=self.guards, label=self.label)

    # ------------------------------------------------------------------------
    # Properties
    # ------------------------------------------------------------------------

    @property
    def is_symbolic(self) -> bool:
        return self.expr is not None

    @property
    def is_exact(self) -> bool:
        return self.expr is not None and self.mode == EXACT

    def depends_on(self, k: int) -> bool:
        if self.expr is None:
            return True
        return self.chart.symbols[k] in self.expr.free_symbols

    def __repr__(self) -> str:
        return f"ScalarField({self.label!r}, mode={self.mode})"

    # ------------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------------

    @cached_property
    def _evaluator(self) -> Callable[..., float]:
        if self.expr is None:
            func = self.func
            return lambda *coords: func(coords)
        return sp.lambdify(self.chart.symbols, self.expr, modules='math')

    @cached_property
    def _guard_evaluators(self) -> Tuple[Tuple[sp.Expr, Callable[..., float]], ...]:
        return tuple(
            (guard, sp.lambdify(self.chart.symbols, guard, modules='math'))
            for guard in self.guards
        )

    def _raw(self, coords: Tuple[float, ...]) -> float:
        """Evaluate without the domain-box test"""
        for guard, evaluate_guard in self._guard_evaluators:
            try:
                value = evaluate_guard(*coords)
            except (ValueError, ZeroDivisionError, OverflowError) as e:
                raise DomainError(f"{self.label}: cannot evaluate {guard} at {coords}: {e}") from e
            if isinstance(value, complex) or not value > 0:
                raise DomainError(f"{self.label}: non-positive argument {guard} = {value} at {coords}")
        try:
            value = self._evaluator(*coords)
        except ZeroDivisionError as e:
            raise NonFiniteError(f"{self.label}: division by zero at {coords}") from e
        except GeometryError:
            raise
        except (OverflowError, ValueError) as e:
            raise NonFiniteError(f"{self.label}: {e} at {coords}") from e
        if isinstance(value, complex):
            raise NonFiniteError(f"{self.label}: complex value at {coords}")
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteError(f"{self.label}: non-finite value at {coords}")
        return value

    def eval(self, p: PointLike) -> float:
        return self._raw(self.chart.validate(p))

    def eval_high_precision(self, p: PointLike, digits: int = 50) -> mpmath.mpf:
        """Arbitrary-precision value (expression-backed fields only)"""
        if self.expr is None:
            raise NonDifferentiableError(f"{self.label}: opaque fields have no high-precision evaluation")
        coords = self.chart.validate(p)
        subs = {sym: sp.Float(repr(c), digits) for sym, c in zip(self.chart.symbols, coords)}
        value = self.expr.evalf(digits, subs=subs)
        with mpmath.workdps(digits):
            return mpmath.mpf(str(value))

    # ------------------------------------------------------------------------
    # Derivatives
    # ------------------------------------------------------------------------

    @cached_property
    def _partials(self) -> Tuple['ScalarField', ...]:
        return tuple(self._differentiate(k) for k in range(self.chart.dim))

    def _differentiate(self, k: int) -> 'ScalarField':
        name = self.chart.coordinate_names[k]
        d = sp.diff(self.expr, self.chart.symbols[k])
        # guards keep every Abs argument away from zero
        d = d.replace(sp.DiracDelta, lambda *args: sp.S.Zero)
        if d.has(sp.Derivative, sp.Subs):
            raise NonDifferentiableError(f"{self.label} is not differentiable in {name}")
        return ScalarField(self.chart, expr=d, mode=self.mode, fd_step=self.fd_step,
                           guards=self.guards, label=f"d({self.label})/d{name}")

    def derivative(self, k: int) -> 'ScalarField':
        """The partial derivative field along coordinate k"""
        if self.expr is not None:
            return self._partials[k]
        return ScalarField.from_callable(lambda coords: self.partial(coords, k), self.chart,
                                         fd_step=self.fd_step, label=f"d({self.label})/d{k}")

    def partial(self, p: PointLike, k: int) -> float:
        coords = self.chart.validate(p)
        if not 0 <= k < self.chart.dim:
            raise IndexError(f"coordinate index {k} out of range for dimension {self.chart.dim}")
        if self.is_exact:
            return self._partials[k]._raw(coords)

        h = self.fd_step
        plus = list(coords)
        minus = list(coords)
        plus[k] += h
        minus[k] -= h
        if not (self.chart.contains(plus) and self.chart.contains(minus)):
            raise BoundaryError(
                f"{self.label}: {self.chart.coordinate_names[k]} is within {h} of the domain boundary at {coords}"
            )
        return (self._raw(tuple(plus)) - self._raw(tuple(minus))) / (2.0 * h)

    def gradient(self, p: PointLike) -> np.ndarray:
        return np.array([self.partial(p, k) for k in range(self.chart.dim)])

    def directional(self, p: PointLike, v: Sequence[float]) -> float:
        """Sum of v^k times the k-th partial; zero components are skipped"""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.chart.dim,):
            raise ValueError(f"direction must have {self.chart.dim} components, got {v.shape}")
        return float(sum(vk * self.partial(p, k) for k, vk in enumerate(v) if vk != 0.0))

    # ------------------------------------------------------------------------
    # Arithmetic
    # ------------------------------------------------------------------------

    def _coerce(self, other) -> Optional['ScalarField']:
        if isinstance(other, ScalarField):
            if other.chart.dim != self.chart.dim:
                raise ValueError("fields live on charts of different dimension")
            return other
        if isinstance(other, numbers.Real):
            return ScalarField.constant(other, self.chart, mode=self.mode, fd_step=self.fd_step)
        return None

    def _combine(self, other, op: Callable, swap: bool = False):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        left, right = (other, self) if swap else (self, other)
        if left.expr is not None and right.expr is not None:
            mode = EXACT if left.mode == EXACT and right.mode == EXACT else FINITE_DIFFERENCE
            return ScalarField(self.chart, expr=op(left.expr, right.expr), mode=mode,
                               fd_step=self.fd_step, guards=_merge_guards(left.guards, right.guards))
        return ScalarField.from_callable(lambda coords: op(left._raw(coords), right._raw(coords)),
                                         self.chart, fd_step=min(left.fd_step, right.fd_step),
                                         label=f"{op.__name__}({left.label}, {right.label})")

    def __add__(self, other):
        return self._combine(other, operator.add)

    def __radd__(self, other):
        return self._combine(other, operator.add, swap=True)

    def __sub__(self, other):
        return self._combine(other, operator.sub)

    def __rsub__(self, other):
        return self._combine(other, operator.sub, swap=True)

    def __mul__(self, other):
        return self._combine(other, operator.mul)

    def __rmul__(self, other):
        return self._combine(other, operator.mul, swap=True)

    def __truediv__(self, other):
        return self._combine(other, operator.truediv)

    def __rtruediv__(self, other):
        return self._combine(other, operator.truediv, swap=True)

    def __neg__(self):
        return self * -1

    def __pow__(self, exponent: numbers.Real):
        if not isinstance(exponent, numbers.Real):
            return NotImplemented
        if self.expr is not None:
            return ScalarField(self.chart, expr=self.expr ** sp.sympify(exponent), mode=self.mode,
                               fd_step=self.fd_step, guards=self.guards)
        base = self

        def power(coords):
            value = base._raw(coords)
            if value <= 0 and float(exponent) != int(exponent):
                raise DomainError(f"{base.label}: non-positive base {value} for power {exponent}")
            return value ** exponent

        return ScalarField.from_callable(power, self.chart, fd_step=self.fd_step,
                                         label=f"({self.label})^{exponent}")


def exp_field(f: ScalarField) -> ScalarField:
    if f.expr is not None:
        return ScalarField(f.chart, expr=sp.exp(f.expr), mode=f.mode, fd_step=f.fd_step, guards=f.guards)
    return ScalarField.from_callable(lambda coords: math.exp(f._raw(coords)), f.chart,
                                     fd_step=f.fd_step, label=f"exp({f.label})")


def log_field(f: ScalarField) -> ScalarField:
    if f.expr is not None:
        return ScalarField(f.chart, expr=sp.log(f.expr), mode=f.mode, fd_step=f.fd_step, guards=f.guards)

    def logarithm(coords):
        value = f._raw(coords)
        if value <= 0:
            raise DomainError(f"log of non-positive value {value} ({f.label}) at {coords}")
        return math.log(value)

    return ScalarField.from_callable(logarithm, f.chart, fd_step=f.fd_step, label=f"log({f.label})")


# ============================================================================
# VECTOR FIELDS
# ============================================================================

@dataclass(frozen=True)
class VectorFieldSpec:
    """
    Vector field given by its coordinate components.

    Base fields carry m components acting on x1..xm; fields on the optical
    manifold carry n components.
    """

    components: Tuple[ScalarField, ...]
    label: str = ''

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ValueError("vector field needs at least one component")
        chart = components[0].chart
        if len(components) not in (chart.base_dim, chart.dim):
            raise ValueError(
                f"vector field has {len(components)} components; expected {chart.base_dim} or {chart.dim}"
            )
        if any(c.chart.dim != chart.dim for c in components):
            raise ValueError("vector field components live on different charts")
        object.__setattr__(self, 'components', components)

    @property
    def chart(self) -> Chart:
        return self.components[0].chart

    @property
    def size(self) -> int:
        return len(self.components)

    def at(self, p: PointLike) -> np.ndarray:
        return np.array([c.eval(p) for c in self.components])

    def jacobian(self, p: PointLike) -> np.ndarray:
        """J[mu, nu] = d_nu X^mu over the ambient coordinates"""
        return np.array([[c.partial(p, nu) for nu in range(self.size)] for c in self.components])

    def lie_bracket(self, other: 'VectorFieldSpec', p: PointLike) -> np.ndarray:
        """Coordinate components of [self, other] at p"""
        if other.size != self.size:
            raise ValueError("cannot bracket fields of different ambient dimension")
        return other.jacobian(p) @ self.at(p) - self.jacobian(p) @ other.at(p)


# ============================================================================
# OPERATIONS
# ============================================================================

def evaluate(f: ScalarField, p: PointLike) -> float:
    return f.eval(p)


def partial(f: ScalarField, p: PointLike, k: int) -> float:
    return f.partial(p, k)


def directional(f: ScalarField, p: PointLike, v: Sequence[float]) -> float:
    return f.directional(p, v)
