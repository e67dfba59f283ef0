"""Spline prediction with uncertainty on triangulated surfaces.

Gaussian field models whose precision is the squared mass-whitened
Laplacian of a surface mesh; exact interpolating or smoothing posterior
means, conditional simulation, anisotropy estimation by maximum
likelihood, and a closed-form spherical reference for validation.
"""

from ._kernels import BACKEND as kernel_backend
from .data import (
    GriddedField,
    franke_3d,
    franke_cylinder,
    franke_sphere,
    load_gridded_csv,
    predictive_score,
    save_gridded_csv,
)
from .errors import (
    BindingError,
    ConvergenceError,
    MeshFormatError,
    MeshValidationError,
    ModelError,
    SolverError,
)
from .fem import (
    AnisotropyParams,
    FemOperators,
    assemble,
    compute_phi0,
    dense_sigma_oracle,
    export_operators,
)
from .gmrf import (
    PosteriorModel,
    SimulationBatch,
    posterior_mean,
    posterior_mean_alpha,
    posterior_model,
    posterior_variance,
    simulate_posterior,
    simulate_prior,
    simulate_simple_kriging,
)
from .likelihood import FitResult, concentrated_loglik, fit, observation_covariance
from .mesh import (
    BoundObservations,
    ObservationSet,
    TriangleMesh,
    bind_observations,
    generate_cylinder_mesh,
    generate_sphere_mesh,
    load_mesh,
    load_observations_csv,
    maximin_node_design,
    save_mesh,
    save_observations_csv,
)
from .solver import (
    ProjectedSolver,
    RankOneSystem,
    SpdFactor,
    estimate_spectral_bounds,
    factor_spd,
    sample_precision,
    solve_rank_one,
)
from .sphere_ref import (
    SphereKernel,
    conditional_covariance,
    kernel_gram,
    kernel_value,
    kriging_predict,
)

__version__ = "0.1.0"

__all__ = [
    "AnisotropyParams",
    "BindingError",
    "BoundObservations",
    "ConvergenceError",
    "FemOperators",
    "FitResult",
    "GriddedField",
    "MeshFormatError",
    "MeshValidationError",
    "ModelError",
    "ObservationSet",
    "PosteriorModel",
    "ProjectedSolver",
    "RankOneSystem",
    "SimulationBatch",
    "SolverError",
    "SpdFactor",
    "SphereKernel",
    "TriangleMesh",
    "assemble",
    "bind_observations",
    "concentrated_loglik",
    "compute_phi0",
    "conditional_covariance",
    "dense_sigma_oracle",
    "estimate_spectral_bounds",
    "export_operators",
    "factor_spd",
    "fit",
    "franke_3d",
    "franke_cylinder",
    "franke_sphere",
    "generate_cylinder_mesh",
    "generate_sphere_mesh",
    "kernel_backend",
    "kernel_gram",
    "kernel_value",
    "kriging_predict",
    "load_gridded_csv",
    "load_mesh",
    "load_observations_csv",
    "maximin_node_design",
    "observation_covariance",
    "posterior_mean",
    "posterior_mean_alpha",
    "posterior_model",
    "posterior_variance",
    "predictive_score",
    "sample_precision",
    "save_gridded_csv",
    "save_mesh",
    "save_observations_csv",
    "simulate_posterior",
    "simulate_prior",
    "solve_rank_one",
    "simulate_simple_kriging",
]
