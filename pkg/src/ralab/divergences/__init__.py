"""Distance estimators, closed forms, and inequality checkers."""

from .assignment import BACKEND_NAME, assignment_cost, solve_assignment, w1_exact
from .checks import (SandwichReport, check_sandwich_gaussian,
                     check_transport_inequality, w1_population_surrogate)
from .closed_forms import (expfamily_ipm_closed, kl_empirical, kl_expfamily,
                           kl_gaussian, psd_sqrt, w2_gaussian)
from .ipm import IpmConfig, IpmDiverged, IpmResult, ipm_estimate, rademacher_estimate
from .report import DivergenceReport

__all__ = [
    "BACKEND_NAME", "assignment_cost", "solve_assignment", "w1_exact",
    "SandwichReport", "check_sandwich_gaussian", "check_transport_inequality",
    "w1_population_surrogate", "expfamily_ipm_closed", "kl_empirical",
    "kl_expfamily", "kl_gaussian", "psd_sqrt", "w2_gaussian",
    "IpmConfig", "IpmDiverged", "IpmResult", "ipm_estimate",
    "rademacher_estimate", "DivergenceReport",
]
