"""Birman-Schwinger spectral toolkit for isotropic polytropes of Vlasov-Poisson."""

from .birman_schwinger import (
    BirmanSchwinger,
    edge_error,
    essential_spectrum_bands,
    estimate_mu_star,
    find_lambda_hat,
    galerkin_lowest,
    mu_curve,
    recover_eigenfunction,
)
from .errors import (
    EigenFailure,
    IntegratorFailure,
    NoCutoffFound,
    QuadratureNotConverged,
    SpectrumHit,
    StepRejected,
    VPBirmanError,
)
from .flow_minimizer import initial_state, minimize
from .orbits import build_domain_grid, compute_orbits, omega_bounds, period_T1, turning_points
from .phase_space import FourierFunction, build_sine_table
from .steady_state import PolytropeParams, SteadyState, build_polytrope

__version__ = "0.1.0"

__all__ = [
    "BirmanSchwinger",
    "EigenFailure",
    "FourierFunction",
    "IntegratorFailure",
    "NoCutoffFound",
    "PolytropeParams",
    "QuadratureNotConverged",
    "SpectrumHit",
    "SteadyState",
    "StepRejected",
    "VPBirmanError",
    "build_domain_grid",
    "build_polytrope",
    "build_sine_table",
    "compute_orbits",
    "edge_error",
    "essential_spectrum_bands",
    "estimate_mu_star",
    "find_lambda_hat",
    "galerkin_lowest",
    "initial_state",
    "minimize",
    "mu_curve",
    "omega_bounds",
    "period_T1",
    "recover_eigenfunction",
    "turning_points",
]
