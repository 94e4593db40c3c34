//! Numerical spin geometry on exactly solvable submanifolds.
//!
//! The crate builds irreducible complex Clifford representations from
//! lower-dimensional factors, assembles the submanifold Dirac operator
//! `D_H`, the twisted Dirac operator `D_M^{ΣN}` and its modified version
//! `D_f` on a small catalog of model geometries, and evaluates the
//! eigenvalue lower bounds together with the integral identities and
//! limiting-case spinor equations behind them.
//!
//! Module map:
//!
//! - [`clifford`]: representations, volume elements, `ω⊥`, tangent multiplication.
//! - [`models`]: model embeddings, adapted frames, second fundamental form, conformal data.
//! - [`spectral`]: Fourier lattices and spinor fields on flat tori.
//! - [`operators`]: connections, Dirac-type operator blocks, spectra, conformal transport.
//! - [`bounds`]: curvature/spinor functionals, lower bounds, identities, residuals.

pub mod bounds;
pub mod clifford;
mod error;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod spectral;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
