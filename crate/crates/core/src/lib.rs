//! Spherically symmetric Vlasov-Poisson particle code with mollified singular
//! initial data, plus the sweep, stability and limit experiments built on it.
//!
//! Units: the field equation is `(r^2 u')' = 4 pi gamma r^2 rho`, so a
//! particle at radius `r` feels `-gamma M(r) / r^2 + L^2 / r^3`.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod limits;
pub mod numerics;
pub mod radial_field;
pub mod scales;

pub use error::{Result, VpError};
