"""
Geometry Package
Compatible Lorentzian metrics on shearfree manifolds of Kähler-Sasaki type
"""

from .errors import (
    GeometryError,
    DomainError,
    BoundaryError,
    NonFiniteError,
    ExpressionError,
    NonDifferentiableError,
    SingularFrameError,
    MetricSignatureError,
    ParameterError,
    InconsistentPotentialError,
    InternalInconsistencyError,
    UnknownCheckError,
    UnknownFaultError,
    EvaluationError,
)
from .fields import (
    EXACT,
    FINITE_DIFFERENCE,
    Chart,
    Point,
    ScalarField,
    VectorFieldSpec,
    evaluate,
    partial,
    directional,
)
from .kahler_base import (
    KahlerBase,
    base_data,
    build_base,
    conformal_base,
    custom_base,
    flat_base,
    kahler_residuals,
    verify_potential,
    warped_base,
)
from .adapted_frame import bracket_table, dual_coframe, lift_frame
from .metric import (
    MetricParams,
    TransversalParams,
    assemble,
    params_from_transversal,
    transversal_from_params,
)
from .connection import (
    ChristoffelTable,
    christoffel,
    christoffel_sigma1,
    conformal_path,
    conformal_transform,
    grad_components,
    fault_mask,
    inject_fault,
    s_tensor,
)
from .curvature import ricci, riemann
from .oracle import (
    CHECKS,
    CORE_CHECKS,
    KoszulContext,
    VerificationReport,
    christoffel_oracle,
    default_tolerances,
    koszul,
    koszul_tensor,
    verify,
)

__all__ = [
    'GeometryError',
    'DomainError',
    'BoundaryError',
    'NonFiniteError',
    'ExpressionError',
    'NonDifferentiableError',
    'SingularFrameError',
    'MetricSignatureError',
    'ParameterError',
    'InconsistentPotentialError',
    'InternalInconsistencyError',
    'UnknownCheckError',
    'UnknownFaultError',
    'EvaluationError',
    'EXACT',
    'FINITE_DIFFERENCE',
    'Chart',
    'Point',
    'ScalarField',
    'VectorFieldSpec',
    'evaluate',
    'partial',
    'directional',
    'KahlerBase',
    'base_data',
    'build_base',
    'conformal_base',
    'custom_base',
    'flat_base',
    'kahler_residuals',
    'verify_potential',
    'warped_base',
    'bracket_table',
    'dual_coframe',
    'lift_frame',
    'MetricParams',
    'TransversalParams',
    'assemble',
    'params_from_transversal',
    'transversal_from_params',
    'ChristoffelTable',
    'christoffel',
    'christoffel_sigma1',
    'conformal_path',
    'conformal_transform',
    'grad_components',
    'fault_mask',
    'inject_fault',
    's_tensor',
    'ricci',
    'riemann',
    'CHECKS',
    'CORE_CHECKS',
    'KoszulContext',
    'VerificationReport',
    'christoffel_oracle',
    'default_tolerances',
    'koszul',
    'koszul_tensor',
    'verify',
]
