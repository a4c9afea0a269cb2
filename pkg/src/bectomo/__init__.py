"""Density-matrix tomography of fixed-N two-mode Bose condensates.

Simulates the phase-shift + beamsplitter + atom-counting interferometer and
inverts its count statistics diagonal by diagonal.
"""

from .errors import *  # noqa: F401,F403
from .forward import (
    DiagonalOperator,
    FourierDiagonalData,
    PhaseGrid,
    ProbabilitySurface,
    diagonal_operator,
    exact_probabilities,
    fourier_transform,
    harmonic,
    probability_surface,
)
from .noise import NoiseSpec, noise_norm_estimate, perturb_gaussian, sample_multinomial
from .reconstruction import (
    JointSolution,
    ReconstructionConfig,
    ReconstructionReport,
    clip_to_psd,
    error_report,
    joint_least_squares_oracle,
    reconstruct,
    solve_diagonal,
)
from .states import (
    CoherentSpinParams,
    PureState,
    TwoModeDensityMatrix,
    coherent_projected_state,
    density_from_mixture,
    fock_product_state,
    per_diagonal_distance,
    state_distance,
)
from .su2 import (
    AngularMomentumGeometry,
    BeamSplitterSetting,
    RotationMatrix,
    log_factorial_table,
    rotation_matrix,
    rotation_oracle,
    wigner_element,
)

__version__ = "0.1.0"
