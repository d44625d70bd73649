//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, gradient assembly, persistence and training.
#[derive(Debug, Error)]
pub enum Error {
    /// A linear system has a pivot below the singularity threshold.
    #[error("singular system: pivot {pivot:.3e} at index {pivot_index} below threshold 1e-12")]
    SingularSystem { pivot_index: usize, pivot: f64 },

    /// The sensitivity system of an implicit layer is not invertible.
    #[error("non-invertible sensitivity ({system} system): {source}")]
    SingularSensitivity {
        /// Which linear system failed: "one-layer", "inner" or "outer".
        system: &'static str,
        source: Box<Error>,
    },

    /// The relaxation integration produced a non-finite or exploding state.
    #[error("divergence at iteration {iteration}: state became non-finite or grew unbounded")]
    Divergence { iteration: usize },

    /// The plain iterative update used by the unrolled-gradient oracle failed to contract.
    #[error("iterative updates do not converge for these parameters (oracle inapplicable)")]
    IterativeDivergence,

    /// Spectral radius at or above 1: the series oracle does not converge.
    #[error("non-convergent spectral radius {radius:.6} >= 1")]
    NonConvergentRadius { radius: f64 },

    /// An equilibrium did not reach the requested tolerance.
    #[error("equilibrium not converged: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    NotConverged { residual: f64, tolerance: f64 },

    /// Invalid dimension or parameter value at an API boundary.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value lies outside its declared range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Malformed model or dataset file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// File carries a version header this build does not understand.
    #[error("unsupported version: expected `{expected}`, found `{found}`")]
    UnsupportedVersion { expected: String, found: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A training step failed; carries the step and sample indices.
    #[error("training step {step} failed at sample {sample}: {source}")]
    TrainStep {
        step: usize,
        sample: usize,
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
