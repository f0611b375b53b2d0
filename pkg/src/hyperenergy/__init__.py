"""Energies of wave fields on non-timelike hypersurfaces.

Leapfrog solver for u_tt - div(A grad u) = G with Dirichlet data, traces and
energies on graphs t = S(x), the pointwise identities behind the energy
estimates, compatibility-preserving data mollification and a CLI to run it all.
"""

from .coefficients import CoefficientField, a_norm_sq, ellipticity_bounds
from .compat import (
    CHI,
    CompatHierarchy,
    build_hierarchy,
    compatibility_residual,
    mollify_first_order,
    mollify_high_order,
)
from .energy import (
    classical_energy,
    conormal,
    generalized_energy,
    horizontal_energy,
    partial_energy,
    surface_energy,
    theorem_reports,
    trace,
)
from .fields import BoundaryField, DivAGrad, InitialData, SpaceTimeField, div_a_grad
from .geometry import (
    CausalKind,
    Domain,
    Hypersurface,
    SpatialGrid,
    classify,
    region_masks,
    surface_normal,
    validate_foliation,
)
from .identities import (
    decomposition_suite,
    extend_multiplier,
    flux_balance,
    gradient_decomposition,
    gronwall_coefficient_min,
    multiplier_balance,
    residual_energy_identity,
    residual_multiplier_identity,
    sphere_decomposition_check,
)
from .lorentz import lorentz_scenario
from .scenarios import Scenario, linear_combination, manufactured
from .solver import SolveResult, solve

__version__ = "0.1.0"
