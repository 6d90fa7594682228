//! Run orchestration: config files, training runs, comparisons,
//! evaluation and omega calibration.

mod calibrate;
pub mod config;
mod compare;
mod eval;
mod run;

pub use calibrate::{calibrate_omega, omega_from_covariances, OmegaCalibration};
pub use compare::{median, run_compare, CompareCell, CompareRow, CompareSummary};
pub use config::{config_hash, load_config, parse_config, to_config_text};
pub use eval::run_eval;
pub use run::{
    run_train, RunManifest, TrainOutcome, CHECKPOINT_FILE, CONFIG_ECHO_FILE, EVAL_FILE, MANIFEST_FILE, METRICS_FILE,
    TIMINGS_FILE,
};
