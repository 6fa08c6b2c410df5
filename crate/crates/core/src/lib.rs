//! Hybrid zonotope set operations, data-driven identification of piecewise
//! affine systems, reachability and set-valued state estimation.

pub mod error;
pub mod estimate;
pub mod ident;
pub mod linalg;
pub mod lp;
pub mod oracle;
pub mod reach;
pub mod setops;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
