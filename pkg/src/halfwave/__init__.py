"""Numerical laboratory for the focusing L2-critical half-wave equation.

The package builds the ground state of  i u_t = Du - |u|^2 u  on a large
periodic box, the generalized-kernel elements of the linearized operator,
a graded family of blow-up profile correctors with their compatibility
constants, the finite-dimensional modulation dynamics, degenerate radiation
data, split-step time evolution, and a modulated decomposition that tracks
a concentrating solution against the predicted parameter laws.
"""

from .grids import (
    Grid,
    Field,
    BoundaryContaminationWarning,
    apply_multiplier,
    derivative,
    sqrt_laplacian,
    inner_r,
    sobolev_norm,
    conserved_quantities,
    scaling_generator,
    dealias,
)
from .ground_state import (
    GroundState,
    solve_petviashvili,
    solve_gradient_flow_oracle,
    gn_sharpness_check,
    save_ground_state,
    load_ground_state,
)
from .linearized import (
    LinearizedOperator,
    KernelElements,
    build,
    apply_linearization,
    solve_constrained,
    kernel_elements,
    kernel_relation_residuals,
    coercivity_spectrum,
)
from .profiles import (
    ProfileSet,
    ORDERS,
    block_for_order,
    build_profiles,
    assemble_qp,
    profile_error,
    momentum_expansion_check,
    save_profiles,
    load_profiles,
)
from .errors import (
    GridMismatchError,
    MultiplierDomainError,
    DivergenceError,
    PositivityViolationError,
    StaleGroundStateError,
    SolvabilityError,
    DegeneracyError,
    NumericsError,
    InconsistencyError,
    InstabilityError,
    ConservationViolationError,
    SearchFailureError,
    BasinError,
    BlowupReached,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "Field",
    "BoundaryContaminationWarning",
    "apply_multiplier",
    "derivative",
    "sqrt_laplacian",
    "inner_r",
    "sobolev_norm",
    "conserved_quantities",
    "scaling_generator",
    "dealias",
    "GroundState",
    "solve_petviashvili",
    "solve_gradient_flow_oracle",
    "gn_sharpness_check",
    "save_ground_state",
    "load_ground_state",
    "LinearizedOperator",
    "KernelElements",
    "build",
    "apply_linearization",
    "solve_constrained",
    "kernel_elements",
    "kernel_relation_residuals",
    "coercivity_spectrum",
    "ProfileSet",
    "ORDERS",
    "block_for_order",
    "build_profiles",
    "assemble_qp",
    "profile_error",
    "momentum_expansion_check",
    "save_profiles",
    "load_profiles",
    "GridMismatchError",
    "MultiplierDomainError",
    "DivergenceError",
    "PositivityViolationError",
    "StaleGroundStateError",
    "SolvabilityError",
    "DegeneracyError",
    "NumericsError",
    "InconsistencyError",
    "InstabilityError",
    "ConservationViolationError",
    "SearchFailureError",
    "BasinError",
    "BlowupReached",
    "__version__",
]
