"""Higher-order Lagrangian mechanics over jets of coordinates and their time
derivatives, with exponential and power-series gravitational potentials."""

__version__ = "0.1.0"

from .expr import parse, render, evaluate, partial_derivative, total_time_derivative
from .jet import JetPoint, Trajectory, taylor_propagate, truncate_jet
from .lagrangian import (
    ExpressionLagrangian,
    QuadraticLagrangian,
    energy_ranks,
    eval_lagrangian,
    free_particle,
    harmonic,
    pais_uhlenbeck,
    partial_wrt_order,
)
from .euler_lagrange import (
    derive_eom,
    el_residual,
    force_ladder,
    generalized_hamiltonian,
    newton_balance_residual,
    ostrogradsky_momenta,
)
from .integrate import IntegratorSpec, compare_taylor, conservation_report, integrate_eom
from .action import PerturbationSpec, action_integral, paper_action, stationarity_test
from .potentials import (
    PotentialModel,
    laplacian_residual,
    newtonian_comparison,
    orbit_simulate,
    potential_force,
    potential_value,
    series_divergence_scan,
)

__all__ = [
    "__version__",
    "parse", "render", "evaluate", "partial_derivative", "total_time_derivative",
    "JetPoint", "Trajectory", "taylor_propagate", "truncate_jet",
    "ExpressionLagrangian", "QuadraticLagrangian", "energy_ranks", "eval_lagrangian",
    "free_particle", "harmonic", "pais_uhlenbeck", "partial_wrt_order",
    "derive_eom", "el_residual", "force_ladder", "generalized_hamiltonian",
    "newton_balance_residual", "ostrogradsky_momenta",
    "IntegratorSpec", "compare_taylor", "conservation_report", "integrate_eom",
    "PerturbationSpec", "action_integral", "paper_action", "stationarity_test",
    "PotentialModel", "laplacian_residual", "newtonian_comparison", "orbit_simulate",
    "potential_force", "potential_value", "series_divergence_scan",
]
