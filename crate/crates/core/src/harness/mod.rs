//! Experiment driver: paired parameter sweeps, the rank-dependence search,
//! CSV output and `key = value` configuration files.

pub mod config;
mod rankdep;
mod sweep;

pub use config::{parse_count, ConfigFile};
pub use rankdep::{factored_probe, fit_slope, rank_dependence, rank_dependence_with, RankDepPoint, RankDepResult, RankDepSpec};
pub use sweep::{
    append_csv, run_algorithm, run_sweep, truth_incoherence, write_records, Algorithm, Dataset, Estimate, ExperimentRecord,
    SweepSpec, CSV_HEADER,
};
