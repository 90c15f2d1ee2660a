"""Simulation and analysis of sequential consumer-search markets with social learning."""

from .belief import BeliefState, HistoryProjection, posterior_means, posterior_update, project_history
from .dynamics import (
    MarketTrace,
    Status,
    classify_business,
    estimate_lost_probability,
    run_coupled,
    run_market,
    utility_convergence_series,
)
from .errors import *  # noqa: F401,F403
from .model import (
    Atoms,
    Beta,
    BusinessTruth,
    CanonicalEquilibrium,
    DemandResponsive,
    DiscreteJoint,
    Exogenous,
    FixedClamped,
    IndependentPrior,
    MarketSpec,
    MyopicMonopoly,
    PerScreenPrior,
    PiecewiseLinearCDF,
    PointMass,
    Uniform,
    ValidatedMarket,
    beta_pair,
    validate_market,
)
from .pricing import (
    DemandCurve,
    EquilibriumProfile,
    canonical_equilibrium,
    demand_responsive_price,
    effective_value_demand,
    monopolist_optimum,
    quantile_revenue,
    symmetric_equilibrium,
    verify_equilibrium,
    welfare,
)
from .rng import RandomnessBundle
from .screening import InspectionSignal, effective_params, screen_draw, screen_posterior_update
from .search import (
    SearchOutcome,
    brute_force_policy_value,
    expected_utility_known,
    optimal_search,
    search_index,
    steady_state_utility,
    transaction_probabilities,
)

__version__ = "0.1.0"
