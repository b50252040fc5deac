"""Rational flow ``Q_t(mu) = (1-t) mu * (delta_e - t mu)^-1`` on finite abelian groups."""

from .errors import (
    AlgebraError,
    CapacityError,
    ConvFlowError,
    DegenerateMeasureError,
    DomainError,
    InconclusiveError,
    InvalidElementError,
    InvalidMeasureError,
    InvalidSpecError,
    NumericalError,
)
from .groups import AbelianGroup, Subgroup, enumerate_subgroups, generated_subgroup, make_group
from .limits import (
    basic_sets,
    cokernel,
    fixed_points,
    haar_on,
    is_acyclic,
    kernel,
    nonsurjectivity_witness,
    power_limit_oracle,
    predict_omega_limit,
    reach_sets,
    stable_rate,
    support_subgroup,
)
from .measures import (
    Polynomial,
    PowerSeries,
    ProbabilityMeasure,
    SignedMeasure,
    conv_matrix,
    convolve,
    dirac,
    evaluate_series,
    exponential_series,
    geometric_series,
    neumann_inverse,
    rational_map,
    tv_distance,
    uniform,
)
from .semigroup import (
    delta_compose,
    delta_power,
    delta_power_complement,
    differential,
    fixed_point_differential,
    generator,
    q_iterate,
    q_map,
    solve_modified_cd,
    tangent_spectrum,
)

__version__ = "0.1.0"
