"""parabolib: synthetic sphere-plane force campaigns and their inverse calibration.

Simulates measurement grids in three operation modes (static force, force
gradient, dissipation), runs per-distance parabola fits, calibrates the
curvature-vs-distance law to recover the contact point, and quantifies the
bias of compensating a drifting contact potential with one constant voltage.
"""

from .analysis import (
    BiasCurve,
    ConsistencyReport,
    FluctDecomposition,
    constant_cpd_bias,
    cross_mode_consistency,
    decompose_fluct,
    fixed_voltage_fluct,
    qpc_effective_cpd,
)
from .config import RunConfig, demo_config, dump_config, load_config
from .errors import ConfigError, FitError, ParabolibError, SchemaError
from .fitting import (
    CalibrationProfiles,
    FreeExponentFit,
    absolute_distances,
    extract_profiles,
    fit_free_exponent,
    fit_parabola,
    fit_power_law,
)
from .forward import (
    FrequencyShift,
    auxiliary_force,
    capacitance,
    capacitance_derivatives,
    casimir_force_pfa,
    electric_observable,
    electrostatic_curvature,
    fluct_total,
    gradient_to_frequency_shift,
    noiseless_observable,
    synthesize_grid,
)
from .gridio import read_grid, read_profiles, write_grid, write_profiles
from .model import (
    DEFAULT_LAW,
    LAWS,
    MODES,
    CpdProfile,
    ForceComponents,
    Geometry,
    MeasurementGrid,
    OscillatorParams,
    ParabolaFit,
    PowerLawFit,
    Scenario,
    evaluate_cpd,
)
from .pipeline import PipelineResult, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "BiasCurve",
    "CalibrationProfiles",
    "ConfigError",
    "ConsistencyReport",
    "CpdProfile",
    "DEFAULT_LAW",
    "FitError",
    "FluctDecomposition",
    "ForceComponents",
    "FreeExponentFit",
    "FrequencyShift",
    "Geometry",
    "LAWS",
    "MODES",
    "MeasurementGrid",
    "OscillatorParams",
    "ParabolaFit",
    "ParabolibError",
    "PipelineResult",
    "PowerLawFit",
    "RunConfig",
    "Scenario",
    "SchemaError",
    "absolute_distances",
    "auxiliary_force",
    "capacitance",
    "capacitance_derivatives",
    "casimir_force_pfa",
    "constant_cpd_bias",
    "cross_mode_consistency",
    "decompose_fluct",
    "demo_config",
    "dump_config",
    "electric_observable",
    "electrostatic_curvature",
    "evaluate_cpd",
    "extract_profiles",
    "fit_free_exponent",
    "fit_parabola",
    "fit_power_law",
    "fixed_voltage_fluct",
    "fluct_total",
    "gradient_to_frequency_shift",
    "load_config",
    "noiseless_observable",
    "qpc_effective_cpd",
    "read_grid",
    "read_profiles",
    "run_pipeline",
    "synthesize_grid",
    "write_grid",
    "write_profiles",
]
