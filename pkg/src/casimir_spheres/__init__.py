"""Casimir interaction between two spheres.

Three mutually validating computation routes: the exact functional-determinant
representation, the proximity force approximation, and closed-form
small-separation asymptotic expansions.
"""

from .round_trip import (
    DIRICHLET,
    PEC,
    PERMEABLE,
    BlockMatrix,
    BoundaryPair,
    Condition,
    Field,
    Geometry,
    Mode,
    SingularTransitionError,
    TruncationOverflowError,
    assemble_em_block,
    assemble_scalar_block,
    em_pair,
    neumann,
    robin,
    scalar_pair,
    transition_A,
    transition_B,
    translation_element,
)
from .special_functions import (
    DEBYE,
    DebyeCoefficients,
    LogScaled,
    bessel_i_half,
    bessel_i_half_prime,
    bessel_k_half,
    bessel_k_half_prime,
    debye_validate,
    wigner3j_m,
    wigner3j_zero,
)
from .spectral import (
    ConvergenceSpec,
    NotConvergedError,
    ResultKind,
    ResultRecord,
    SpectralRadiusExceededError,
    energy_T0,
    force,
    free_energy,
    logdet_one_minus,
    trace_over_m,
)
from .pfa import (
    PlatePair,
    Regime,
    g_a,
    g_s,
    h_a,
    h_s,
    pfa_closed_small_d,
    pfa_free_energy,
    plate_free_energy_density,
)
from .asymptotics import (
    CC_FORCE_FIT_REFERENCE,
    ExpansionResult,
    cc_force_coefficients,
    energy_asym_T0,
    force_asym_T0,
    free_energy_leading,
    sphere_plane_limit,
)

__version__ = "0.1.0"
