//! Guaranteed reachable-set over-approximation for unknown discrete-time
//! systems, computed directly from noisy input-state trajectory data.
//!
//! The library revolves around three set representations ([`sets::Zonotope`],
//! [`sets::MatrixZonotope`], [`sets::IntervalMatrix`]) and two propagation
//! pipelines:
//!
//! * [`linear_reach`] characterizes every linear model `[A B]` consistent
//!   with the recorded data and a bounded-noise assumption as a matrix
//!   zonotope, then propagates the initial set through that model family.
//! * [`nonlinear_reach`] handles Lipschitz nonlinear dynamics by fitting a
//!   least-squares affine model per step and over-approximating the model
//!   mismatch plus linearization remainder from the data residuals.
//!
//! [`data`] generates trajectories from ground-truth systems, assembles the
//! stacked data matrices, and provides the right-inverses the pipelines
//! require. Everything is a pure function over immutable values; the
//! embarrassingly parallel verification loops go through [`parallel`], which
//! uses rayon when the `parallel` feature (default) is enabled and falls
//! back to a sequential implementation otherwise.
//!
//! All set arithmetic is plain 64-bit floating point without directed
//! rounding: the containment guarantees are set-theoretic, not
//! floating-point-rigorous.

pub mod data;
pub mod linear_reach;
mod lp;
pub mod nonlinear_reach;
pub mod parallel;
pub mod sets;

/// Dense dynamically-sized matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense dynamically-sized column vector used throughout.
pub type Vector = nalgebra::DVector<f64>;

/// Errors produced by set construction, data assembly, and reachability.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ReachError {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// A NaN or infinite entry was found where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The stacked data matrix does not have full row rank, so no
    /// right-inverse exists. The data is not sufficiently exciting.
    #[error(
        "data not sufficiently exciting: rank {rank} < required {required} \
         (sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}, tol = {tol:.3e}){at_step}"
    )]
    RankDeficient {
        rank: usize,
        required: usize,
        sigma_min: f64,
        sigma_max: f64,
        tol: f64,
        /// Formatted " at step k" when raised inside a propagation loop.
        at_step: String,
    },

    /// An interval bound with `lower > upper` in some entry.
    #[error("invalid interval: lower > upper at entry ({row}, {col})")]
    InvalidInterval { row: usize, col: usize },

    /// An operation received an empty collection it cannot work with.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Catch-all for argument contract violations with a description.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ReachError {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        ReachError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ReachError>;
