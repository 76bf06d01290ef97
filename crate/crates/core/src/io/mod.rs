//! Configuration files, result files and the manufacturing-grid post-processor.

pub mod config;
pub mod dump;
pub mod infill;
pub mod output;
pub mod raster;

pub use config::{config_to_string, load_config, parse_config, OutputSettings, RunConfig};
pub use dump::FieldDump;
pub use infill::{infill_map, InfillCell, InfillGrid};
pub use output::{write_log_csv, write_outputs, write_sweep_csv, RunWriter, LOG_COLUMNS};
