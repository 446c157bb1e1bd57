//! Cross-environment hyperparameter selection and bootstrap meta-evaluation
//! of experiment results.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod normalize;
pub mod report;
pub mod select;
pub mod simulate;
pub mod stats;
pub mod streams;
pub mod synthetic;

pub use error::{Error, Result};
