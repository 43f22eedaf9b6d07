//! Separability certification for multipartite PPT density matrices.
//!
//! Works with states on `C^{K_1} ⊗ … ⊗ C^{K_m} ⊗ C^N` whose rank equals the
//! tail dimension `N`. Such states, when PPT and admitting a product basis
//! with a full-rank compression, can be rewritten in the canonical form
//! `ρ = √F·T†T·√F` built from a commuting family of normal `N×N` matrices;
//! from that form an explicit convex decomposition into product projectors
//! follows by simultaneous diagonalization. This crate implements the whole
//! pipeline: PPT checks, product-basis search, canonical extraction,
//! decomposition, and independent certificate verification, plus generators
//! for states of this class and a JSON/CLI front end.

use num_complex::Complex64;

pub mod canonical;
pub mod io;
pub mod multilinear;
pub mod numerics;
pub mod oracle;
pub mod separability;

mod error;

pub use error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;

/// Shorthand complex constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
