pub mod cli;
pub mod curvature;
pub mod error;
pub mod invariant;
pub mod linalg;
pub mod representation;
pub mod subproduct;

pub use error::{Error, Result};
