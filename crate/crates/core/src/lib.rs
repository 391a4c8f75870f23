//! Quantum-filtering simulator for continuous two-qubit parity measurement
//! with two atom–cavity systems probed in series by one homodyne-detected
//! laser beam.
//!
//! * [`hilbert`]: truncated tensor space and operator catalog
//! * [`sde_physical`]: full filter with homodyne and photon-counting records
//! * [`filter_reduced`]: four-dimensional parity filter, self- or record-driven
//! * [`observables`]: variances, Bell overlaps, closed-form diagnostics
//! * [`ensemble`]: seeded trajectory ensembles, statistics, scaling study
//! * [`io`]: run configuration, record files, CSV and SVG output

pub mod ensemble;
pub mod error;
pub mod filter_reduced;
pub mod hilbert;
pub mod io;
pub mod noise;
pub mod observables;
pub mod params;
pub mod sde_physical;
pub mod table;

pub use error::{Error, Result};
pub use filter_reduced::{AlphaSchedule, ReducedKet};
pub use hilbert::{build_catalog, Ket, Op, OperatorCatalog, SpaceSpec};
pub use params::{RampProfile, RampSchedule, SystemParams};
pub use sde_physical::{QubitConfig, TrajectoryRecord};
pub use table::DecimatedTable;
