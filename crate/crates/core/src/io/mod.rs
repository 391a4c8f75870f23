//! Run configuration, trajectory record files, CSV tables and SVG figures.

pub mod config;
pub mod csv_out;
pub mod record;
pub mod svg;

pub use config::{EnsembleSection, OutputsSection, ParamsSection, RunConfig, ScalingSection};
pub use record::{read_record, write_record};
