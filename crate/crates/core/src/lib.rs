//! Numerical laboratory for L2 hypocoercivity of kinetic Fokker-Planck
//! equations with generalized transport `T f = psi'(v) d_x f - phi'(x) d_v f`
//! and collision `L f = d_v(e^{-psi} d_v(e^{psi} f))`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod equilibria;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod grid;
pub mod hypocoercivity;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod rates;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
