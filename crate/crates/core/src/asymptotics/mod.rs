//! Limiting predictions: effective noise levels and FDP/TPP curves.

mod bayes;
mod lasso;

pub use bayes::*;
pub use lasso::*;
