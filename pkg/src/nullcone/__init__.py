"""Spectral tools for renormalized geodesic null cones near Schwarzschild."""
from .spectral import (
    ConfigurationError,
    LPProfile,
    SpectralField,
    SphereGrid,
    analyze,
    besov_norm,
    laplacian,
    lp_project,
    sobolev_norm,
    synthesize,
)
from .hodge import HodgeSection, d1, d1_star, d2, d2_star, d_inverse, projection
from .foliation import (
    CutoffPair,
    HorizontalField,
    HorizontalMetric,
    SecondFundamentalForm,
    TimeGrid,
    cint,
    cint_star,
    commutator_residual,
    conformal_transport_check,
    jacobian,
    lie_t,
    mixed_norm,
    n_norms,
    nabla_t,
    parallel_transport,
)
from .model import (
    AffineChart,
    PhysicalConeData,
    RenormalizedConeData,
    derenormalize,
    hawking_mass,
    mass_aspect,
    radius_ratio,
    renormalize,
    schwarzschild_exact,
)
from .structure import (
    ConjugatePointError,
    FluxBudget,
    KDecomposition,
    ResidualReport,
    budget_report,
    evolve,
    gauss_curvature,
    residuals_physical,
    residuals_renormalized,
)

__version__ = "0.1.0"
