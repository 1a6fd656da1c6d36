//! Structural maps on `B ⊗ B` with `B = M_n(ℂ)`.
//!
//! The basis vector `eᵢ ⊗ e_k` of `ℂⁿ ⊗ ℂⁿ` has flat index `i·n + k`.
//! `P` and `Q` are the trace-preserving conditional expectations onto
//! `B ⊗ I` and `I ⊗ B`; `(P − Q)²` is the HS-orthogonal projection onto
//! `N⊗I + I⊗N` (with `N` the traceless part of `B`), and `I − (P − Q)²`
//! projects onto `ℂI + V` where `V = N ⊗ N = ker(P + Q)`.

use alloc::vec::Vec;

// Unused when std is linked in (e.g. via dev-dependencies); needed for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hsspace::{eigh, SubspaceBasis, HERMITIAN_TOL};
use crate::matrix::{Matrix, C64, ONE, ZERO};
use crate::random::{haar_unitary, random_psd, random_weights};
use crate::schmidt::pure_mts_from_unitary;
use crate::{Error, Result};

/// A state on `B ⊗ B`: positive `h` with `τ(h) = 1`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "StateRepr"))]
pub struct StateElement {
    n: usize,
    h: Matrix,
    rank_tol: f64,
}

/// Unvalidated wire form; deserialization goes through [`StateElement::new`].
#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct StateRepr {
    n: usize,
    h: Matrix,
    rank_tol: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<StateRepr> for StateElement {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        StateElement::new(r.n, r.h, r.rank_tol)
    }
}

/// Allowed deviation of `τ(h)` from 1.
pub const TRACE_TOL: f64 = 1e-12;

impl StateElement {
    /// Validates and Hermitizes `h`.
    pub fn new(n: usize, h: Matrix, rank_tol: f64) -> Result<Self> {
        check_dim(&h, n)?;
        let scale = h.hs_norm().max(f64::MIN_POSITIVE);
        let residual = h.hermitian_residual();
        if residual > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { residual });
        }
        let h = h.hermitian_part();
        let trace = h.tau();
        if (trace - ONE).norm() > TRACE_TOL {
            return Err(Error::NotNormalized { trace: trace.re });
        }
        let eig = eigh(&h)?;
        if eig.min() < -rank_tol * eig.max() {
            return Err(Error::NotPositive {
                min_eigenvalue: eig.min(),
            });
        }
        Ok(Self { n, h, rank_tol })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.h
    }

    pub fn into_matrix(self) -> Matrix {
        self.h
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Same state with a different rank tolerance (revalidated).
    pub fn with_rank_tol(&self, rank_tol: f64) -> Result<Self> {
        Self::new(self.n, self.h.clone(), rank_tol)
    }
}

pub(crate) fn check_dim(x: &Matrix, n: usize) -> Result<()> {
    let m = n * n;
    if x.rows() != m || x.cols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: x.rows().max(x.cols()),
        });
    }
    Ok(())
}

/// `Tr₂(x)`: the `n × n` matrix `Σ_k x[(i,k),(j,k)]`.
pub fn partial_trace_second(x: &Matrix, n: usize) -> Result<Matrix> {
    check_dim(x, n)?;
    Ok(Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| x[(i * n + k, j * n + k)]).sum()
    }))
}

/// `Tr₁(x)`: the `n × n` matrix `Σ_i x[(i,k),(i,l)]`.
pub fn partial_trace_first(x: &Matrix, n: usize) -> Result<Matrix> {
    check_dim(x, n)?;
    Ok(Matrix::from_fn(n, n, |k, l| {
        (0..n).map(|i| x[(i * n + k, i * n + l)]).sum()
    }))
}

/// `P(a ⊗ b) = τ(b)·(a ⊗ I)`.
pub fn cond_exp_p(x: &Matrix, n: usize) -> Result<Matrix> {
    let t = partial_trace_second(x, n)?.scale_real(1.0 / n as f64);
    Ok(t.kron(&Matrix::identity(n)))
}

/// `Q(a ⊗ b) = τ(a)·(I ⊗ b)`.
pub fn cond_exp_q(x: &Matrix, n: usize) -> Result<Matrix> {
    let t = partial_trace_first(x, n)?.scale_real(1.0 / n as f64);
    Ok(Matrix::identity(n).kron(&t))
}

/// `(P − Q)²(x)`, the projection onto `N⊗I + I⊗N`.
pub fn proj_offdiag(x: &Matrix, n: usize) -> Result<Matrix> {
    let y = &cond_exp_p(x, n)? - &cond_exp_q(x, n)?;
    Ok(&cond_exp_p(&y, n)? - &cond_exp_q(&y, n)?)
}

/// `(I − (P − Q)²)(x)`, the projection onto `ℂI + V`.
pub fn proj_ci_plus_v(x: &Matrix, n: usize) -> Result<Matrix> {
    Ok(x - &proj_offdiag(x, n)?)
}

/// `(P + Q)(x)`; vanishes exactly on `V`.
pub fn p_plus_q(x: &Matrix, n: usize) -> Result<Matrix> {
    Ok(&cond_exp_p(x, n)? + &cond_exp_q(x, n)?)
}

/// Projection onto `V = N ⊗ N`: `x − τ(x)I − (P−Q)²(x)`.
pub fn proj_v(x: &Matrix, n: usize) -> Result<Matrix> {
    let mut out = proj_ci_plus_v(x, n)?;
    let t = x.tau();
    out.axpy(-t, &Matrix::identity(n * n));
    Ok(out)
}

/// Generalized Gell-Mann matrices: a Hermitian basis of the traceless `n × n`
/// matrices, orthonormal for `⟨a, b⟩ = Tr(b*a)/n`.
pub fn traceless_basis(n: usize) -> Vec<Matrix> {
    let norm = (n as f64 / 2.0).sqrt();
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut s = Matrix::zeros(n, n);
            s[(j, k)] = ONE;
            s[(k, j)] = ONE;
            out.push(s.scale_real(norm));
            let mut a = Matrix::zeros(n, n);
            a[(j, k)] = C64::new(0.0, -1.0);
            a[(k, j)] = C64::new(0.0, 1.0);
            out.push(a.scale_real(norm));
        }
    }
    for l in 1..n {
        let coef = (2.0 / (l * (l + 1)) as f64).sqrt() * norm;
        let mut d = Matrix::zeros(n, n);
        for j in 0..l {
            d[(j, j)] = C64::new(coef, 0.0);
        }
        d[(l, l)] = C64::new(-(l as f64) * coef, 0.0);
        out.push(d);
    }
    out
}

/// HS-orthonormal Hermitian basis of `V = N ⊗ N`, dimension `(n² − 1)²`.
pub fn basis_v(n: usize) -> SubspaceBasis {
    let g = traceless_basis(n);
    let mut out = Vec::with_capacity(g.len() * g.len());
    for a in &g {
        for b in &g {
            out.push(a.kron(b));
        }
    }
    SubspaceBasis::from_orthonormal(n * n, out)
}

/// HS-orthonormal Hermitian basis of `N⊗I + I⊗N`, dimension `2(n² − 1)`.
pub fn basis_offdiag(n: usize) -> SubspaceBasis {
    let g = traceless_basis(n);
    let id = Matrix::identity(n);
    let mut out: Vec<Matrix> = g.iter().map(|a| a.kron(&id)).collect();
    out.extend(g.iter().map(|b| id.kron(b)));
    SubspaceBasis::from_orthonormal(n * n, out)
}

/// Residuals of `P(h) = I` and `Q(h) = I`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginalReport {
    pub p_residual: f64,
    pub q_residual: f64,
    /// `‖(P−Q)²(h)‖₂`, which must vanish for marginal tracial states.
    pub offdiag_residual: f64,
    pub is_marginal_tracial: bool,
    pub tol: f64,
}

impl MarginalReport {
    pub fn max_residual(&self) -> f64 {
        self.p_residual.max(self.q_residual)
    }
}

pub fn marginal_residuals(h: &Matrix, n: usize) -> Result<(f64, f64)> {
    let id = Matrix::identity(n * n);
    let p = (&cond_exp_p(h, n)? - &id).hs_norm();
    let q = (&cond_exp_q(h, n)? - &id).hs_norm();
    Ok((p, q))
}

pub fn check_marginal(h: &StateElement, tol: f64) -> MarginalReport {
    let n = h.n();
    let (p_residual, q_residual) =
        marginal_residuals(h.matrix(), n).expect("state dimension validated on construction");
    let offdiag_residual = proj_offdiag(h.matrix(), n)
        .expect("state dimension validated on construction")
        .hs_norm();
    MarginalReport {
        p_residual,
        q_residual,
        offdiag_residual,
        is_marginal_tracial: p_residual.max(q_residual) <= tol,
        tol,
    }
}

/// The tracial state `h = I`.
pub fn state_tau(n: usize) -> Result<StateElement> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2"));
    }
    StateElement::new(n, Matrix::identity(n * n), 1e-9)
}

/// Convex combination `Σ wᵢ hᵢ`.
pub fn mix(states: &[StateElement], weights: &[f64]) -> Result<StateElement> {
    let Some(first) = states.first() else {
        return Err(Error::InvalidWeights("no states given"));
    };
    if states.len() != weights.len() {
        return Err(Error::InvalidWeights(
            "weight count does not match state count",
        ));
    }
    if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
        return Err(Error::InvalidWeights("weights must be non-negative"));
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights("weights must sum to 1"));
    }
    let n = first.n();
    let m = n * n;
    let mut h = Matrix::zeros(m, m);
    for (s, &w) in states.iter().zip(weights) {
        if s.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.n(),
            });
        }
        h.axpy(C64::new(w, 0.0), s.matrix());
    }
    let rank_tol = states.iter().map(|s| s.rank_tol()).fold(0.0, f64::max);
    StateElement::new(n, h, rank_tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SampleMethod {
    /// Random convex combination of `k ≤ n²` random pure marginal tracial states.
    Mixture,
    /// Project a random state onto `ℂI + V` and shrink toward `I` until positive.
    ProjectShrink,
}

impl SampleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleMethod::Mixture => "mixture",
            SampleMethod::ProjectShrink => "project_shrink",
        }
    }
}

impl core::str::FromStr for SampleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(Self::Mixture),
            "project_shrink" | "project-shrink" => Ok(Self::ProjectShrink),
            _ => Err(Error::InvalidArgument("unknown sample method")),
        }
    }
}

/// Seeded sampler of marginal tracial states.
pub fn sample_mts(n: usize, seed: u64, method: SampleMethod) -> Result<StateElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_mts_with(n, &mut rng, method)
}

pub fn sample_mts_with<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    method: SampleMethod,
) -> Result<StateElement> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2"));
    }
    match method {
        SampleMethod::Mixture => {
            let k = rng.random_range(1..=n * n);
            let weights = random_weights(rng, k);
            let states = (0..k)
                .map(|_| pure_mts_from_unitary(&haar_unitary(rng, n)).map(|(_, h)| h))
                .collect::<Result<Vec<_>>>()?;
            mix(&states, &weights)
        }
        SampleMethod::ProjectShrink => {
            let m = n * n;
            let w = random_psd(rng, m, 0.0);
            let t = w.tau().re;
            project_shrink(&w.scale_real(1.0 / t), n)
        }
    }
}

/// `h = (1 − t)I + t·g` with `g = (I − (P−Q)²)(w)` and the largest `t ∈ (0, 1]`
/// keeping `h` positive. Since `h = I + t(g − I)`, that `t` is
/// `min(1, −1/λ_min(g − I))`.
pub fn project_shrink(w: &Matrix, n: usize) -> Result<StateElement> {
    check_dim(w, n)?;
    let id = Matrix::identity(n * n);
    let g = proj_ci_plus_v(w, n)?;
    let d = (&g - &id).hermitian_part();
    let lmin = eigh(&d)?.min();
    let t = if lmin >= -1.0 { 1.0 } else { -1.0 / lmin };
    let mut h = id;
    h.axpy(C64::new(t, 0.0), &d);
    StateElement::new(n, h, 1e-9)
}

/// Right slice map `a ⊗ b ↦ τ(ρ* b)·a`.
pub fn slice_right(x: &Matrix, rho: &Matrix, n: usize) -> Result<Matrix> {
    check_dim(x, n)?;
    check_side(rho, n)?;
    let inv = 1.0 / n as f64;
    Ok(Matrix::from_fn(n, n, |i, j| {
        let mut acc = ZERO;
        for k in 0..n {
            for l in 0..n {
                acc += rho[(k, l)].conj() * x[(i * n + k, j * n + l)];
            }
        }
        acc * inv
    }))
}

/// Left slice map `a ⊗ b ↦ τ(ρ* a)·b`.
pub fn slice_left(x: &Matrix, rho: &Matrix, n: usize) -> Result<Matrix> {
    check_dim(x, n)?;
    check_side(rho, n)?;
    let inv = 1.0 / n as f64;
    Ok(Matrix::from_fn(n, n, |k, l| {
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += rho[(i, j)].conj() * x[(i * n + k, j * n + l)];
            }
        }
        acc * inv
    }))
}

fn check_side(x: &Matrix, n: usize) -> Result<()> {
    if x.rows() != n || x.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.rows(),
        });
    }
    Ok(())
}
