//! Config-driven Monte Carlo experiments, CSV datasets, plot data and bound
//! calibration.

pub mod calibrate;
pub mod config;
pub mod dataset;
pub mod experiments;
pub mod plot;

pub use calibrate::{calibrate_constants, Calibration};
pub use config::{ExperimentConfig, ExperimentKind, Mechanism, Preset};
pub use dataset::{
    read_csv, read_csv_file, write_csv, write_csv_file, Record, TrialLabel, CSV_HEADER,
};
pub use experiments::{run_experiment, verify_audit, AuditLog, RunOptions, RunResult};
pub use plot::{emit_plot_data, PlotOutput};
