//! Factoring matrices of determinant one into products of unipotent
//! triangular matrices.
//!
//! The algebra (polynomials, unipotent products, recurrences) is written
//! against the [`scalar::Ring`] trait and used with exact rational complex
//! numbers, polynomials and floating complex numbers alike. Numerical code is
//! generic over `F: scalar::Real`; the aliases below fix the common choices.

pub mod chart;
pub mod error;
pub mod factor;
pub mod json;
pub mod matrix;
pub mod polyring;
pub mod sampling;
pub mod scalar;
pub mod spray;
pub mod submersion;
pub mod tracker;
pub mod unipotent;

pub use error::{Error, ErrorClass, Result};

pub type C64 = num_complex::Complex<f64>;
pub type C32 = num_complex::Complex<f32>;
pub type ComplexMatrix = matrix::Matrix<C64>;
pub type ExactMatrix = matrix::Matrix<scalar::ExactComplex>;
pub type SymbolicMatrix = matrix::Matrix<polyring::Poly>;
pub type NumericChain = unipotent::FactorChain<C64>;
pub type ExactChain = unipotent::FactorChain<scalar::ExactComplex>;
pub type SymbolicChain = unipotent::FactorChain<polyring::Poly>;
pub type NumericFactor = factor::ElementaryFactor<C64>;
pub type SymbolicFactor = factor::ElementaryFactor<polyring::Poly>;
pub type Point = spray::Point<f64>;
