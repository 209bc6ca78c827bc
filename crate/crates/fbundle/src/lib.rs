//! Exact-arithmetic engine for formal (T)-structures and F-bundles over
//! truncated power-series rings: framing trivializations, u-direction
//! extension, cyclicity/generation condition checks, maximal unfoldings,
//! uniqueness comparisons and the equivariant lift, together with built-in
//! constructions for the rank-3 cyclic-weight example and the ℂP¹ A/B
//! mirror pair.
//!
//! Everything is computed over ℚ (rational functions in declared
//! parameters); there is no floating point anywhere and all identities are
//! checked exactly at the declared truncation order.

pub mod connection;
pub mod descriptor;
pub mod equivariant;
pub mod error;
pub mod framing;
pub mod instances;
pub mod matrix;
pub mod parse;
pub mod poly;
pub mod scalar;
pub mod series;
pub mod symbols;
pub mod unfolding;

pub use error::{Error, Result};
pub use matrix::ScalarMatrix;
pub use scalar::Scalar;
pub use series::{Series, SeriesMatrix, TruncOrder, VarSet};
pub use symbols::{Flavor, ParamSpec, SymbolSet};
