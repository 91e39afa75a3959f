//! Multiscale loop vertex expansion (MLVE) for the quartic vector model
//! with propagator `1/p`.
//!
//! The crate evaluates `log Z(λ, N)` order by order as a sum over two-level
//! jungles, and checks every ingredient numerically against independent
//! routes:
//!
//! * [`model`]: slices, the subtracted logarithm, the slice kernels `V_j`,
//!   `W_j` and their derivatives.
//! * [`combinatorics`]: labeled trees, forests, set partitions and jungles.
//! * [`interpolation`]: the symmetric positive forest formula and its
//!   Gaussian replica corollary.
//! * [`grassmann`]: Grassmann Gaussian integrals as signed minors, a
//!   brute-force Grassmann algebra, and the Fermionic factor of a term.
//! * [`engine`]: the jungle sum itself.
//! * [`oracle`]: one-dimensional quadrature of the intermediate-field
//!   integral, and perturbative coefficients.
//! * [`bounds`]: the block bounds, the convergence series and the Borel
//!   domain.
//! * [`mayer`]: the Mayer expansion of hardcore polymer gases.
//!
//! The `book/` directory at the repository root walks through the
//! mathematics; its code listings are compiled as doc-tests of this crate.

pub mod bounds;
pub mod combinatorics;
pub mod engine;
pub mod error;
pub mod grassmann;
pub mod interpolation;
pub mod mayer;
pub mod model;
pub mod oracle;
pub mod polynomial;
pub mod quadrature;

pub use error::{MlveError, Result};
pub use num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/combinatorics.md")]
    mod combinatorics {}
    #[doc = include_str!("../../../book/src/forest-formula.md")]
    mod forest_formula {}
    #[doc = include_str!("../../../book/src/grassmann.md")]
    mod grassmann {}
    #[doc = include_str!("../../../book/src/jungle-expansion.md")]
    mod jungle_expansion {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/mayer.md")]
    mod mayer {}
}
