pub mod assignment;
pub mod baseline;
pub mod constant_approx;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lemma_lab;
pub mod oracle;
pub mod peeling;
pub mod report;
pub mod rng;
pub mod simplex_grid;

pub use error::{Error, Result};
pub use geometry::*;
pub use report::SolveReport;
