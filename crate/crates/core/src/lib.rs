//! Numerical verification of trans-Sasakian structures and the Hermitian
//! structures `(J_{a,b}, g_{a,b})` on their products.
//!
//! Everything is computed at sampled chart points from expression-defined
//! fields, with derivatives carried exactly by second-order jets.

pub mod check;
pub mod contact;
pub mod error;
pub mod expr;
pub mod geom;
pub mod harmonic;
pub mod jet;
pub mod product;
pub mod riemann;

pub use error::{GeomError, Result};
