//! Shrinkage prediction of latent binomial success rates from split-period
//! count data, with validation criteria, goodness-of-fit/FDR testing and a
//! simulation harness.

pub mod error;
pub mod estimators;
pub mod gof;
pub mod ingest;
pub mod numerics;
pub mod report;
pub mod sim;
pub mod transform;
pub mod validate;

pub use error::{Error, Result};
