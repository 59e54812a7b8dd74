//! Spectral statistics of quantum graphs.
//!
//! The crate computes the eigenvalues of a metric graph with general vertex
//! scattering, tracks the eigenphases of the evolution operator
//! `U(λ) = e^{iλL} S₀`, follows the straight-line flow on the torus of bond
//! phases and evaluates spacing and eigenvector-moment statistics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod crossing;
pub mod eigenphase;
pub mod error;
pub mod export;
pub mod graph;
pub mod lambda;
pub mod linalg;
pub mod sampling;
pub mod spec_file;
pub mod stats;
pub mod torus;

pub use error::{Error, ErrorKind, Result};
pub use graph::{BondScatteringMatrix, MetricGraph, Observable};
pub use spec_file::{GraphSpec, LoadedGraph};

/// Library version embedded in every exported artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
