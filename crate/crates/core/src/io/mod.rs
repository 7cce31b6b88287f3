//! Input files, run configuration and output files.

pub mod config;
pub mod load;
pub mod write;

pub use config::{parse_config, DataPaths, EquityShareMode, PriorMean, PriorSpec, RunConfig};
pub use load::{load_dataset, load_reported, CoferResidual, CountryDataset};
pub use write::{
    baseline_csv, calibration_csv, equity_share_csv, file_digest, goodness_csv, prob_label, summary_csv, sweep_csv,
    write_dataset, RunMetadata,
};
