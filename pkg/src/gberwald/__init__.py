"""Extremal compatible linear connections of Finsler metrics.

The package decides whether a Finsler metric is generalized Berwald: it
averages the metric to a Riemannian one, assembles the linear compatibility
constraints its torsion must satisfy direction by direction, solves for the
norm-minimizing torsion through a chain of conditional minimizations, and
classifies each tangent space (riemannian, classical_berwald,
generalized_berwald, not_generalized_berwald, inconclusive).  A
reconstructed connection and parallel-transport validation close the loop
dynamically.
"""

from .averaging import (
    AveragedMetricData,
    SphereQuadrature,
    averaged_data,
    averaged_data_batch,
    averaged_metric,
    averaged_metric_batch,
    averaged_norm,
    christoffel_star,
    circle_quadrature,
    horizontal_derivative,
    indicatrix_integral,
    orthonormal_frame,
    sphere2_quadrature,
    unit_sphere_quadrature,
)
from .errors import (
    CurveLeavesChart,
    DimensionMismatch,
    GBerwaldError,
    Inconsistent,
    InfeasibleStep,
    NonConvex,
    NotASymmetry,
    NotSPD,
    StencilOutOfDomain,
    UnknownFamily,
    VerticalContact,
    WrongFamily,
    ZeroVector,
)
from .estimator import GeneralizedBerwaldTester
from .expressions import (
    ExpressionError,
    differentiate,
    evaluate,
    parse_expression,
    to_source,
)
from .grid import BoxGrid, parse_grid
from .metrics import (
    ChartPoint,
    FrameMinkowskiFamily,
    MetricFamily,
    MetricJet,
    NumericFamily,
    RandersFamily,
    RiemannianFamily,
    TangentVector,
    eval_jet,
    frame_ground_truth_torsion,
    tangent,
)
from .specfile import BUILTINS, builtin_family, parse_metric_spec, serialize_family
from .tensors import (
    FRAME_CHART,
    FRAME_ORTHONORMAL,
    TorsionTensor,
    torsion_to_chart,
    torsion_to_orthonormal,
)
from .tester import (
    VERDICT_CLASSICAL,
    VERDICT_GB,
    VERDICT_INCONCLUSIVE,
    VERDICT_NOT_GB,
    VERDICT_RIEMANNIAN,
    ClassificationReport,
    PointVerdict,
    PoolSizes,
    TransportResult,
    aggregate_verdicts,
    classify_tangent_space,
    continuity_probe,
    decide,
    pointwise_torsion_field,
    reconstruct_connection,
    validate_connection,
)
from .torsion import (
    ROUTE_CHAIN,
    ROUTE_HORIZONTAL,
    ROUTE_VERTICAL,
    ChainState,
    ConstraintBlock,
    ConstraintPool,
    DirectionPools,
    ExtremalDiagnostics,
    SymmetryReport,
    Tolerances,
    chain_minimize,
    chain_step,
    chain_step_projected,
    constraint_pool,
    extremal_torsion,
    is_horizontal_contact,
    is_vertical_contact,
    make_pools,
    oracle_min_norm,
    residual,
    sigma,
    solve_reference,
    stacked_residual,
    symmetry_invariance_check,
    vertical_margin,
)

__version__ = "0.1.0"
