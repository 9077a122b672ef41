"""Two-mode squeezing of trapped-atom motion: Gaussian engine, Fock statistics,
protocol simulation and measurement models."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    FitError,
    InvalidArgumentError,
    InvalidDataError,
    MechSqueezeError,
    NumericalDegeneracyError,
    ResourceLimitError,
    TruncationError,
    UndefinedRatioError,
)
from .gaussian import (
    GaussianState,
    OscillatorConfig,
    SqueezeParams,
    apply_beam_splitter_50_50,
    apply_rotation,
    apply_squeeze,
    duan_simon_value,
    epr_product,
    eq3_uncertainties,
    momentum_uncertainty_eq2,
    symplectic_eigenvalues,
    thermal,
    vacuum,
    wigner_projection,
    wigner_value,
)
from .fock import (
    FockDistribution,
    TwoModeSqueezeOp,
    s2_matrix_element_sq,
    s2_oracle,
    smsv_probabilities,
    thermal_weighted_distribution,
    tmsv_probabilities,
)
from .protocol import (
    InhomogeneityModel,
    JumpSchedule,
    TwoModeEvolution,
    echo_ratio_vs_delay,
    single_mode_jump_protocol,
    two_mode_protocol,
)
from .spectroscopy import SidebandModel, VelocityScan, gaussian_fit, ratio_R, synthesize_velocity_scan
