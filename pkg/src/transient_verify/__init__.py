"""Reliability audit for numerical simulations of transient chaos in the
Lorenz system under controlled floating-point precision."""

__version__ = "0.1.0"

from .fp_modes import MValue, PrecisionMode, m_add, m_div, m_mul, m_sub, round_p32, unit_roundoff
from .lorenz import (
    Destiny,
    FixedPoints,
    LorenzParams,
    RhsVariant,
    State3,
    classify_destiny,
    fixed_points,
    lorenz_rhs,
)
from .integrator import IntegrationSpec, Trajectory, integrate, rk4_step
from .diagnostics import (
    AttractorExtent,
    ChaoticSegment,
    LyapunovEstimate,
    attractor_extent,
    chaotic_segment,
    largest_lyapunov,
)
from .error_budget import (
    ErrorBudget,
    assemble_budget,
    final_error,
    roundoff_delta0,
    truncation_delta0,
)
from .pipeline import (
    PipelineConfig,
    ValidityReport,
    disagreement_sweep,
    run_validity_test,
    variant_agreement,
)
