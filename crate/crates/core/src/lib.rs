//! Numerical toolkit for marginal tracial states on `M_n(ℂ) ⊗ M_n(ℂ)`.
//!
//! A state on `B ⊗ B` (with `B = M_n(ℂ)`) is represented by its density
//! element `h ≥ 0` with normalized trace `τ(h) = 1`, so the tracial state is
//! `h = I`. A state is *marginal tracial* when both of its restrictions to
//! `B ⊗ I` and `I ⊗ B` are tracial, i.e. `P(h) = Q(h) = I` for the two
//! canonical conditional expectations.
//!
//! The crate is `no_std` (it needs `alloc`). Module map:
//!
//! - [`matrix`]: dense complex matrices.
//! - [`hsspace`]: Hilbert–Schmidt geometry, Hermitian eigensolver, SVD,
//!   range projections, square roots, subspace intersection.
//! - [`margstates`]: conditional expectations, the projector onto
//!   `N⊗I + I⊗N`, canonical subspace bases, state samplers.
//! - [`extremality`]: two independent extremality tests and the purity tests,
//!   collected into a [`Certificate`](extremality::Certificate).
//! - [`descent`]: extreme-point descent and the seeded search for non-pure extreme points.
//! - [`schmidt`]: Schmidt decomposition and pure marginal tracial states.
#![no_std]

extern crate alloc;

pub mod descent;
pub mod extremality;
pub mod hsspace;
pub mod margstates;
pub mod matrix;
pub mod random;
pub mod schmidt;

pub use matrix::{Matrix, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("normalized trace is {trace}, expected 1")]
    NotNormalized { trace: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("not an orthogonal projection of rank {rank} (residual {residual:.3e})")]
    NotProjection { rank: usize, residual: f64 },
    #[error("state is not marginal tracial (residual {residual:.3e})")]
    NotMarginal { residual: f64 },
    #[error("state is not certified extremal")]
    NotExtremal,
    #[error("state has full rank; the block form is empty")]
    FullRank,
    #[error("no invertible principal block of size {rank} found")]
    DefectiveBlock { rank: usize },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("vector is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },
    #[error("vector is not maximally entangled")]
    NotMaximallyEntangled,
    #[error("first marginal is not tracial (residual {residual:.3e})")]
    MarginalNotTracial { residual: f64 },
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("internal inconsistency: {0}")]
    Inconsistent(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

/// Numerical thresholds threaded through every test. Certificates record the
/// values they were computed with.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Generic residual threshold (marginality, purity leaks).
    pub tol: f64,
    /// Eigenvalues `≤ rank_tol·λ_max` count as zero.
    pub rank_tol: f64,
    /// Principal cosines `≥ 1 − angle_tol` count as intersecting directions.
    pub angle_tol: f64,
    /// Singular values `< null_tol·σ_max` of the block-form constraint map count as zero.
    pub null_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            rank_tol: 1e-9,
            angle_tol: 1e-9,
            null_tol: 1e-8,
        }
    }
}

impl Tolerances {
    /// Every threshold divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            tol: self.tol / factor,
            rank_tol: self.rank_tol / factor,
            angle_tol: self.angle_tol / factor,
            null_tol: self.null_tol / factor,
        }
    }
}
