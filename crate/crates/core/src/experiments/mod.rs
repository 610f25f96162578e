//! Configuration files, reproducible sweeps and the validation report.

mod config;
mod sweep;
mod validate;

pub use config::{config_hash, derive_seed, ExperimentConfig};
pub use sweep::{
    default_power_grid, read_rows_csv, run_sweep, run_sweep_to_files, write_rows_csv, ResultRow,
    SweepFile, SweepManifest, SweepSpec, SweptParameter, PUBLISHED_MIN_TRIALS,
};
pub use validate::{
    cdf_vs_quadrature, random_gates, validate, CheckResult, ValidateOptions, ValidationReport,
};
