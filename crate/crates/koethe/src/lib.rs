//! Exact-arithmetic laboratory for a perturbed weighted forward shift on
//! the countable product of rapidly decreasing sequence spaces.
//!
//! Everything is computed over exact rationals (with a dyadic fast path);
//! there is no floating point anywhere. The crate provides:
//!
//! - a snake enumeration of the coordinate grid with fast rank <->
//!   coordinate conversion ([`ordering`]),
//! - a concrete Köthe weight matrix of powers of two and the three
//!   seminorm families built from it ([`weights`]),
//! - the shift operator itself, with closed forms for its powers on the
//!   first basis vector and fast high powers through the perturbed
//!   canonical basis ([`operator`]),
//! - the inductive stage-parameter search with exact condition reports
//!   ([`stage`]),
//! - constructive cyclicity certificates and verification suites
//!   ([`cyclicity`], [`suites`]),
//! - line-oriented text persistence for parameters, vectors and reports
//!   ([`persist`]).

pub mod cyclicity;
pub mod error;
pub mod figure;
pub mod lp;
pub mod operator;
pub mod ordering;
pub mod persist;
pub mod sampler;
pub mod scalar;
pub mod stage;
pub mod suites;
pub mod vector;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vector::{Coord, Rank, RankMap, SparseVector};
