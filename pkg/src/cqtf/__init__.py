"""Mass-constrained ground states of the trapped cubic-quintic energy and
their Thomas-Fermi limit: closed-form limit objects, a normalized-gradient-flow
minimizer on radial grids, and scaling/rate diagnostics."""

__version__ = "0.1.0"

from .diagnostics import (
    ConvergenceReport,
    ScalingFit,
    exterior_decay_check,
    fit_power_law,
    laplacian_bound_check,
    scaling_report,
    tf_comparison,
    verify_report,
)
from .grid import RadialField, RadialGrid, apply_radial_laplacian, integrate, lq_norm
from .minimizer import (
    EnergyParts,
    GroundState,
    InitKind,
    SolverConfig,
    energy_breakdown,
    lagrange_multiplier,
    projected_gradient_minimize,
    rescale,
    residuals,
    solve_ground_state,
    sweep,
    tau_of,
)
from .potentials import PotentialKind, PotentialSpec, verify_tail_conditions
from .thomas_fermi import (
    TFIntegrals,
    TFProfile,
    beta_fn,
    energy_limit_constant,
    log_gamma,
    mu_tf,
    mu_tf_root_find,
    tf_integrals,
    tf_profile,
    u_tf,
)

__all__ = [
    "ConvergenceReport",
    "EnergyParts",
    "GroundState",
    "InitKind",
    "PotentialKind",
    "PotentialSpec",
    "RadialField",
    "RadialGrid",
    "ScalingFit",
    "SolverConfig",
    "TFIntegrals",
    "TFProfile",
    "apply_radial_laplacian",
    "beta_fn",
    "energy_breakdown",
    "energy_limit_constant",
    "exterior_decay_check",
    "fit_power_law",
    "integrate",
    "lagrange_multiplier",
    "laplacian_bound_check",
    "log_gamma",
    "lq_norm",
    "mu_tf",
    "mu_tf_root_find",
    "projected_gradient_minimize",
    "rescale",
    "residuals",
    "scaling_report",
    "solve_ground_state",
    "sweep",
    "tau_of",
    "tf_comparison",
    "tf_integrals",
    "tf_profile",
    "u_tf",
    "verify_report",
    "verify_tail_conditions",
]
