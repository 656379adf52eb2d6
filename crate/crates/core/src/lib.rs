//! Executable semantics for probabilistic programs over quasi-Borel spaces.
//!
//! Measures are pairs of a random variable and a base measure on the reals
//! ([`Measure`]), combined with the monad operations `unit`, `bind`, `map`,
//! and `product`. On top of that sit weighted measures and posterior
//! normalization ([`inference`]), the randomization of kernels
//! ([`randomization`]), iid sequences and exchangeability ([`definetti`]), and
//! a small s-expression language whose programs run under likelihood weighting
//! or lightweight Metropolis–Hastings ([`ppl`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod definetti;
pub mod error;
pub mod inference;
pub mod laws;
pub mod measure;
pub mod ppl;
pub mod randomization;
pub mod source;

pub use base::BaseMeasure;
pub use error::{BaseError, MeasureError, NormError, SourceError};
pub use measure::{Estimate, Kernel, Measure, Method, Support, Value};
pub use source::RandomSource;
