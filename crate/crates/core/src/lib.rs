pub mod amp;
pub mod asymptotics;
pub mod channel;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod lasso;
pub mod linalg;
pub mod metrics;
pub mod modelx;
pub mod normal;
pub mod prior;
pub mod procedures;
pub mod quadrature;
pub mod select;

pub use channel::{NullFdrCdf, ScalarChannel};
pub use error::{Error, Result};
pub use prior::DiscretePrior;
