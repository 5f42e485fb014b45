"""Simulation library for beamspace channel parameter estimation.

A base station with uniform linear arrays estimates path angles from two
simultaneous links: a monostatic echo and an uplink whose paths arrive
from the same directions.  The pipeline is

1. coarse support recovery on an angle-grid dictionary (grid-restricted
   weighted pursuit, plain pursuit, distributed pursuit, plus a
   shift-invariance subspace baseline),
2. off-grid refinement by alternating per-path gradient descent with a
   shared arrival angle across the two links, and
3. Fisher-information bounds quantifying the gain of sharing.

A Monte Carlo harness and a CLI (``isacsim``) drive SNR sweeps into
deterministic CSV files.
"""

from .arrays import ArrayConfig, steering, steering_derivative
from .beamspace import (
    BeamspaceSystem,
    MeasurementOperator,
    MeasurementStack,
    atom_split,
    atom_to_angles,
    beamspace_coefficients,
    build_beamspace,
    build_dictionary,
    build_measurement,
    build_measurement_stack,
    diag_index_set,
    nearest_atom,
)
from .channels import (
    ChannelScene,
    PathParams,
    PilotSet,
    apply_channel,
    complex_noise,
    gen_echo,
    gen_uplink,
    make_pilots,
    mean_entry_power,
    snr_to_noise_var,
    synth_comm_channel,
    synth_sensing_channel,
)
from .crlb import (
    CrlbComparison,
    FisherResult,
    certify_shared_gain,
    crlb_compare,
    fisher_info,
    symmetric_comm_noise,
)
from .esprit import Esprit, esprit_aoa
from .exceptions import (
    ConfigError,
    DegenerateWeightsError,
    DivergenceWarning,
    InvalidSceneError,
    SingularInformationError,
    SingularSystemError,
    SubspaceDeficientError,
)
from .harness import (
    ExperimentConfig,
    MetricRecord,
    run_sweep,
    rmse,
    srp,
    trial_rng,
    write_csv,
)
from .omp import (
    ConventionalOMP,
    DCSSOMP,
    ProposedOMP,
    SparseEstimate,
    coarse_angles,
    correlate_atoms,
    lobe_radius,
    neighborhood,
    neighborhood_weights,
    weighted_ls,
)
from .sage import (
    SageData,
    SageParams,
    SageRefiner,
    cost_comm,
    cost_joint,
    cost_sens,
    least_squares_gains,
    parameter_gradient,
    params_from_scene,
    routed_cost,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # arrays
    "ArrayConfig", "steering", "steering_derivative",
    # beamspace
    "BeamspaceSystem", "MeasurementOperator", "MeasurementStack",
    "atom_split", "atom_to_angles", "beamspace_coefficients",
    "build_beamspace", "build_dictionary", "build_measurement",
    "build_measurement_stack", "diag_index_set", "nearest_atom",
    # channels
    "ChannelScene", "PathParams", "PilotSet", "apply_channel",
    "complex_noise", "gen_echo", "gen_uplink", "make_pilots",
    "mean_entry_power", "snr_to_noise_var", "synth_comm_channel",
    "synth_sensing_channel",
    # sparse pursuit
    "ConventionalOMP", "DCSSOMP", "ProposedOMP", "SparseEstimate",
    "coarse_angles", "correlate_atoms", "lobe_radius", "neighborhood",
    "neighborhood_weights", "weighted_ls",
    # subspace
    "Esprit", "esprit_aoa",
    # refinement
    "SageData", "SageParams", "SageRefiner", "cost_comm", "cost_joint",
    "cost_sens", "least_squares_gains", "parameter_gradient",
    "params_from_scene", "routed_cost",
    # bounds
    "CrlbComparison", "FisherResult", "certify_shared_gain",
    "crlb_compare", "fisher_info", "symmetric_comm_noise",
    # harness
    "ExperimentConfig", "MetricRecord", "run_sweep", "rmse", "srp",
    "trial_rng", "write_csv",
    # errors
    "ConfigError", "DegenerateWeightsError", "DivergenceWarning",
    "InvalidSceneError", "SingularInformationError", "SingularSystemError",
    "SubspaceDeficientError",
]
