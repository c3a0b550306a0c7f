"""Laser phase noise converted to intensity correlations in an EIT Lambda system.

Modules
-------
params   physical parameters and unit helpers
bloch    Bloch matrix, steady state, DC transmission
spectra  noise spectra, C(w), its decomposition, g2(0), sideband phasors
oracle   Monte-Carlo trajectories and spectral estimation
scan     sweeps, linewidth fitting, export, configuration files
"""

from .bloch import (
    BlochSystem,
    DegenerateInputError,
    SteadyState,
    build_bloch_system,
    dc_transmission,
    steady_state,
)
from .oracle import (
    EstimatorConfig,
    TrajectoryEnsemble,
    estimate_g2_zero,
    estimate_spectra,
    simulate_ensemble,
    simulate_trajectory,
)
from .params import ParameterError, SystemParams, reference_params, mhz, to_mhz
from .scan import ScanConfig, ScanRecord, export, fit_linewidth, read_records, run_scan
from .spectra import (
    SpectralDecomposition,
    UndefinedCorrelationError,
    analyze_point,
    correlation_point,
    g2_zero,
    noise_spectra,
    phasor_model,
    pi_products,
    response_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "BlochSystem", "DegenerateInputError", "EstimatorConfig", "ParameterError", "ScanConfig",
    "ScanRecord", "SpectralDecomposition", "SteadyState", "SystemParams", "TrajectoryEnsemble",
    "UndefinedCorrelationError", "analyze_point", "build_bloch_system", "correlation_point",
    "dc_transmission", "estimate_g2_zero", "estimate_spectra", "export", "reference_params",
    "fit_linewidth", "g2_zero", "mhz", "noise_spectra", "phasor_model", "pi_products",
    "read_records", "response_kernel", "run_scan", "simulate_ensemble", "simulate_trajectory",
    "steady_state", "to_mhz",
]
