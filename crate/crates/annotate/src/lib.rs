//! Crowd annotation of inference-rule candidates: verbalized batches over
//! HTTP, trust-filtered majority aggregation and gold-label export.

pub mod aggregate;
pub mod error;
pub mod queue;
pub mod record;
pub mod server;
pub mod stats;
pub mod verbalize;

pub use error::{Error, Result};
