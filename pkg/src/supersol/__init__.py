"""Supersolution certificates for ``u_t = Lap u + f(u)`` with nonnegative data."""

from .certificate import Certificate
from .certificates import (
    GaugeError,
    RegularityGauge,
    build_prop31_supersolution,
    build_prop32_supersolution,
    condp_functional,
    cp_constant,
    critical_exponent,
    necessary_condition_monitor,
    optimal_A,
    subcritical_sufficient,
    supercritical_certificate,
    supercritical_existence_time,
    uff_probe,
)
from .duhamel import (
    MonotonicityError,
    NotSupersolutionError,
    SpaceTimeField,
    apply_F,
    check_subsolution_chain,
    check_supersolution,
    graded_time_grid,
    monotone_solve,
)
from .field_core import (
    Constant,
    Domain,
    Eigenfunction,
    Field,
    Gaussian,
    Nonlinearity,
    PowerSingularity,
    ProfileError,
    Table,
    lq_norm,
    make_field,
    pointwise_compare,
)
from .oracle import OracleRun, sandwich_validate, solve_reference
from .semigroup import (
    SemigroupPlan,
    apply_semigroup,
    jensen_check,
    make_plan,
    smoothing_probe,
    sup_norm_trace,
)

__version__ = "0.1.0"
