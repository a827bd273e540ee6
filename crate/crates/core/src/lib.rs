//! Symbolic-numeric toolkit for Carleman-weight calculations around the
//! separable fourth-order Schrodinger operator i d_t + sum_j d_{x_j}^4:
//! exact operator algebra, weight conjugation, integration-by-parts
//! normal forms, certified quadratic-form lower bounds, and spectral
//! numerics that cross-check the symbolic layer.

pub mod certify;
pub mod conjugate;
pub mod error;
pub mod evolve;
pub mod ibp;
pub mod numgrid;
pub mod symcore;

pub use error::{Error, Result};
