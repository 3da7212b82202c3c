pub mod clicks;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod lhaf;
pub mod linalg;
pub mod rng;
pub mod samplers;
pub mod validation;

pub use error::{GbsError, Result};
pub use exec::Exec;
