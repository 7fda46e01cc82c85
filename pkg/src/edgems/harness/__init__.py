"""Configuration-driven experiments: references, sweeps, diagnostics and output files."""
from .config import ConfigError, ExperimentConfig, SpeciesConfig, load_config, loads_config
from .fields import RasterLoadError, load_permeability, read_raster, write_raster
from .metrics import compute_errors, convergence_rate, energy_trace, max_norm_trace
from .suite import ErrorReport, run_suite

__all__ = [
    "ConfigError", "ErrorReport", "ExperimentConfig", "RasterLoadError", "SpeciesConfig", "compute_errors",
    "convergence_rate", "energy_trace", "load_config", "load_permeability", "loads_config", "max_norm_trace",
    "read_raster", "run_suite", "write_raster",
]
