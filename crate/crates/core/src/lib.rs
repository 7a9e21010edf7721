//! Operator-valued reproducing kernels.

pub mod algebra;
pub mod dsl;
pub mod error;
pub mod gram;
pub mod invariant;
pub mod kernel;
pub mod learn;
pub mod linalg;
pub mod point;
pub mod quadrature;
pub mod spectral;
pub mod suites;
pub mod universality;

pub use error::{Error, Result};
pub use kernel::Kernel;
pub use point::{Domain, Point};
