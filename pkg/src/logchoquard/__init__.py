"""Planar logarithmic Choquard equation: ground states, linearization
spectra, and semiclassical concentration via finite-dimensional reduction.
"""

__version__ = "0.1.0"

from .grids import (
    Field2D,
    Grid2D,
    NormWeights,
    RadialGrid,
    RadialProfile,
    gradient_sq_integral,
    integrate,
    lift_radial,
    x_inner_product,
)
from .logkernel import (
    TruncatedKernelSpectrum,
    bilinear_B,
    build_kernel_spectrum,
    cached_kernel_spectrum,
    convolve,
    radial_log_potential,
)
from .groundstate import (
    AsymptoticsFit,
    GroundStateRecord,
    LimitingProblem,
    SolveOptions,
    energy_I,
    fit_asymptotics,
    grad_I,
    ground_state_field,
    nehari_project,
    solve_ground_state,
)
from .linops import (
    LinearizedOperator,
    SpectrumReport,
    apply_second_derivative,
    coercivity_estimate,
    linearized_at,
    lowest_eigenpairs,
)
from .reduction import (
    CorrectionResult,
    ReducedFunctionalTable,
    ReductionContext,
    grad_I_eps,
    locate_minimizer,
    make_xi_grid,
    project_orthogonal,
    reduced_theta,
    remainder_R,
    solve_correction,
)
from .semiclassical import (
    ConcentrationOptions,
    PotentialSpec,
    SolutionPair,
    assemble_solution_pair,
    eval_potential,
    run_concentration,
)

__all__ = [name for name in dir() if not name.startswith("_")]
