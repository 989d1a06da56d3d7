"""Limiting buffer statistics and uplink outage for an energy-harvesting node.

The node stores exponentially distributed harvests and transmits a fixed
amount of energy whenever its buffer holds more than that amount.
"""
__version__ = "0.1.0"

from .exceptions import ConfigError, DomainError, NumericalInstabilityError, SupportMismatchError
from .special import Branch, gaussian_q, lambert_w, r_series, upper_incomplete_gamma_int
from .storage import (
    BufferSpec,
    EffectiveParams,
    EhProfile,
    Imperfections,
    Policy,
    effective_params,
    step,
    target_power_from_m_eff,
)
from .limiting import (
    FiniteApproxDist,
    FiniteExactDist,
    InfiniteBufferDist,
    LimitingDistribution,
    Section,
    approx_error,
    asymptotic_infinite_limit_check,
    cdf_eval,
    finite_approx,
    finite_exact,
    infinite_pdf,
    integral_residual,
    pdf_eval,
)
from .performance import (
    LinkParams,
    OptimumResult,
    aer,
    channel_outage,
    diversity_slope,
    optimal_delta,
    total_outage,
    total_outage_at,
    transmission_probability,
)
from .simulation import (
    ErrorCounting,
    Estimate,
    SimConfig,
    SimResult,
    binned_masses,
    distribution_distance,
    simulate,
)
