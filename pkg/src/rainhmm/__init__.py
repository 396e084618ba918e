"""Clone-state hidden Markov model for hourly rainfall.

Dry spells are carried by several interchangeable dry states that share
one emission distribution but differ in persistence, each modulated by
seasonal and long-term spline effects; wet states emit censored
generalized Pareto rainfall on a 0.2 mm grid.  The package fits the model
by blockwise adaptive Metropolis, simulates from the posterior, and runs
a battery of predictive checks.
"""

from .model import (
    GRID_MM,
    TRUNC_MM,
    EmissionModel,
    RainfallSeries,
    StateSpace,
    TransitionModel,
    emission_grid_masses,
    emission_matrix,
    emission_params,
    emission_prob,
    forward_loglik,
    forward_loglik_detail,
    gpd_cdf,
    persistence_probs,
    transition_matrix,
)
from .splines import (
    BasisSet,
    CovariateError,
    SplineBasis,
    TimeCovariates,
    build_cyclic_basis,
    build_overall_basis,
    build_time_covariates,
)
from .inference import (
    ChainSet,
    MCMCSettings,
    ParameterLayout,
    PriorSpec,
    mpsrf,
    psrf,
    psrf_table,
    run_mcmc,
)
from .generator import (
    SimulationRequest,
    dry_state_runs,
    iter_ensemble,
    iter_fixed_ensemble,
    simulate_ensemble,
    simulate_series,
)
from .diagnostics import (
    CheckReport,
    EnsembleStats,
    aggregate,
    dry_period_lengths,
    effect_curves,
    seasonal_zero_proportion,
    spearman_autocorr,
    top_k_dry_envelope,
)

__version__ = "0.1.0"

__all__ = [
    "GRID_MM",
    "TRUNC_MM",
    "BasisSet",
    "ChainSet",
    "CheckReport",
    "CovariateError",
    "EmissionModel",
    "EnsembleStats",
    "MCMCSettings",
    "ParameterLayout",
    "PriorSpec",
    "RainfallSeries",
    "SimulationRequest",
    "SplineBasis",
    "StateSpace",
    "TimeCovariates",
    "TransitionModel",
    "aggregate",
    "build_cyclic_basis",
    "build_overall_basis",
    "build_time_covariates",
    "dry_period_lengths",
    "dry_state_runs",
    "effect_curves",
    "emission_grid_masses",
    "emission_matrix",
    "emission_params",
    "emission_prob",
    "forward_loglik",
    "forward_loglik_detail",
    "gpd_cdf",
    "iter_ensemble",
    "iter_fixed_ensemble",
    "mpsrf",
    "persistence_probs",
    "psrf",
    "psrf_table",
    "run_mcmc",
    "seasonal_zero_proportion",
    "simulate_ensemble",
    "simulate_series",
    "spearman_autocorr",
    "top_k_dry_envelope",
    "transition_matrix",
]
