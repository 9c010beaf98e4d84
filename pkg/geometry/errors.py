"""
Geometry errors
Every failure raised by the geometry layer derives from GeometryError (a ValueError)
"""


class GeometryError(ValueError):
    """Base class for invalid geometric input or evaluation failures"""


class DomainError(GeometryError):
    """Point lies outside the declared coordinate box, or has non-finite coordinates"""


class BoundaryError(DomainError):
    """Finite-difference stencil leaves the coordinate box"""


class NonFiniteError(GeometryError):
    """Evaluation produced inf/nan or a complex value"""


class ExpressionError(GeometryError):
    """Expression text could not be parsed or uses forbidden names"""


class NonDifferentiableError(GeometryError):
    """Exact differentiation left an unevaluated derivative node"""


class SingularFrameError(GeometryError):
    """Frame matrix is not invertible"""


class MetricSignatureError(GeometryError):
    """Base metric is not symmetric positive-definite"""


class ParameterError(GeometryError):
    """Metric parameters violate sigma > 0, alpha != 0 or a != 0"""


class InconsistentPotentialError(GeometryError):
    """Measured brackets disagree with the analytic table, i.e. dA != omega"""


class InternalInconsistencyError(GeometryError):
    """A matrix that the construction guarantees invertible turned out singular"""


class UnknownCheckError(GeometryError):
    """Verification check name is not recognised"""


class UnknownFaultError(GeometryError):
    """Fault name, frame label or block in a fault is not recognised"""


class EvaluationError(GeometryError):
    """Wraps a failure during a scenario run with point and check context"""

    def __init__(self, message: str, point_index: int = None, check: str = None):
        super().__init__(message)
        self.point_index = point_index
        self.check = check
