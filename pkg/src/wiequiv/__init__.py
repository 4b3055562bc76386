"""Job-search model with wage insurance and its UI-only replications.

Solves a continuous-time McCall economy where past earnings carry a wage
top-up, constructs unemployment-insurance-only policies that reproduce the same
search behavior and welfare, and verifies the equivalence against independent
oracles (a discrete-time value iteration and a Monte Carlo panel).
"""

from .dist import DistributionSpec, Family, QuadratureError
from .roots import BracketError, bracket_root, expand_bracket, sign_change_count
from .wimodel import (
    BenefitSchedule,
    ModelError,
    Primitives,
    ReservationOutOfSupport,
    SearchMode,
    WIPolicy,
    WISolution,
    analytic_derivatives,
    balance_wi_tax,
    consumption_wi,
    reservation_endogenous,
    reservation_exogenous,
    search_return,
    solve_wi,
    solve_x0,
    surplus_and_effort,
)
from .replicate import (
    ConsumptionSchedule,
    LumpSumTax,
    NonUniqueRoot,
    ScheduleIntegrals,
    UIOnlyPolicy,
    VerificationReport,
    balance_budget_shift,
    construct_benefits_endogenous,
    construct_consumption_schedule,
    construct_ui_exogenous,
    replicate_policy,
    surplus_match_residuals,
    verify_replication,
)
from .welfare import (
    WelfareReport,
    acceptance_rate,
    budget_residual,
    exante_welfare,
    pv_weights,
    welfare_report,
)
from .oracle import SimConfig, SimReport, simulate_paired, simulate_panel, vi_reservation
from .cli import ConfigError, ScenarioConfig, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
