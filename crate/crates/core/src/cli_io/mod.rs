//! Configuration files, scenario dispatch and output files of the command-line driver.

pub mod config;
pub mod run;
pub mod snapshot;

pub use config::{
    parse_config, parse_config_str, AmbientMode, GridConfig, NormalSpec, OutputConfig, PhysicsConfig, ScenarioConfig,
    ScenarioKind, StepSize, SweepConfig, TangentialSpec, UnitsConfig, Violations,
};
pub use run::{coefficient_table, run_config_file, run_scenario, RunOptions, RunSummary};
pub use snapshot::{read_snapshot_binary, write_snapshot_binary, DensityTable, SnapshotHeader};
