//! Landscape analysis and Markov chain reduction for metastable diffusions
//!
//! dx = −(∇U + ℓ) dt + √(2ε) dW, with ℓ = J(U)∇U and J(·) skew-symmetric.

pub mod chain;
pub mod error;
pub mod field;
pub mod landscape;
pub mod poly;
pub mod quadrature;
pub mod sim;
pub mod spec;
pub mod testfn;

pub use error::{Error, Result};
pub use field::{Field, FieldEval};
pub use spec::PotentialSpec;
