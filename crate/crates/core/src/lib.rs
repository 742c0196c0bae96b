//! Mining typed entailment candidates between dependency-path relations,
//! plus the scorers and evaluation harness used to judge them.

pub mod baselines;
pub mod candidate;
pub mod discovery;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod meta;
pub mod path;
pub mod teg;

pub use candidate::Candidate;
pub use error::{Error, Result};
