//! Sampled search-volume indices and what repeated sampling does to them.
//!
//! The crate models an index that is computed from a random subsample of
//! search logs, so two downloads of the same query disagree. It provides a
//! synthetic sampler with a known ground truth, a reader and on-disk catalog
//! for exported CSV files, the multi-sample averaging remedy with its
//! correlation diagnostics, a coordinate-descent LASSO, and the two
//! experiments built on it: variable-selection recovery and nowcasting.

pub mod aggregate;
pub mod draws;
pub mod error;
pub mod ingest;
pub mod lasso;
pub mod model;
pub mod nowcast;
pub mod presets;
pub mod sampler;
pub mod seed;
pub mod sim;
pub mod vintage;

pub use error::{Error, Result};
