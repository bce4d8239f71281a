//! Exact and numeric tooling for reducing left-invariant Laplace-Beltrami operators on Lie
//! groups to first-order equations via coisotropic commutative ideals.

pub mod algebra;
pub mod bilinear;
pub mod diffop;
pub mod error;
pub mod expr;
pub mod field;
pub mod models;
pub mod quadrature;
pub mod rational;
pub mod reduction;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
