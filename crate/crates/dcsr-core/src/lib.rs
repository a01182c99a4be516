//! Delta-compressed sparse row (dCSR) codec and kernels for int8
//! neural-network weight matrices.
//!
//! The format factors each row's nonzero column indices into a linear
//! ramp (slope + per-lane deltas + per-group intercepts) so a fixed-lane
//! vector unit can recompose indices with one fused multiply-add, and
//! stores the delta nibbles with dynamic bitwidth extension so the common
//! small deltas cost four bits. This crate provides:
//!
//! - dense int8 matrices, generators, and simple file formats ([`matrix`], [`io`])
//! - the delta-linear row encoding and nibble extension schemes ([`dle`], [`dbe`])
//! - the serialized container and its encoder/decoder ([`container`])
//! - compressed-sparse baselines for footprint comparison ([`baselines`])
//! - a lane-masked vector-engine abstraction with operation counters ([`engine`])
//! - matrix-vector and matrix-matrix kernels that run bit-identically to
//!   a scalar oracle ([`kernels`])

pub mod baselines;
pub mod container;
pub mod dbe;
pub mod dle;
pub mod engine;
pub mod error;
pub mod footprint;
pub mod io;
pub mod kernels;
pub mod matrix;
pub(crate) mod wire;

pub use container::{
    audit_group_constraints, decode_matrix, decode_matrix_with, encode_matrix, DcsrMatrix,
};
pub use engine::{Counters, LaneVector, Predicate, ScalarEngine, VectorEngine};
pub use error::{Error, Result};
pub use footprint::FootprintBreakdown;
pub use matrix::{DenseMatrixI8, GeneratorSpec, QuantizationParams, SparseRow};
