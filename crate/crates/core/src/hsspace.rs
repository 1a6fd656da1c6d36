//! Linear algebra over the Hilbert–Schmidt space of `m × m` complex matrices.
//!
//! All inner products and norms use the normalized trace: `⟨a, b⟩ = τ(b*a)`
//! with `τ(x) = Tr(x)/m`, hence `‖I‖₂ = 1` and `‖a‖₁ = Σσᵢ/m`.

use alloc::vec::Vec;

// Unused when std is linked in (e.g. via dev-dependencies); needed for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::matrix::{vec_norm, Matrix, C64, ONE, ZERO};
use crate::{Error, Result};

/// Relative Hermiticity gate for [`eigh`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative drop threshold used by [`orthonormalize`].
pub const DEPENDENCE_TOL: f64 = 1e-10;
/// Relative negativity allowed in square-root inputs.
pub const PSD_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// `⟨a, b⟩ = τ(b*a)`.
pub fn hs_inner(a: &Matrix, b: &Matrix) -> Result<C64> {
    a.same_shape(b)?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    Ok(hs_inner_unchecked(a, b))
}

#[inline]
pub(crate) fn hs_inner_unchecked(a: &Matrix, b: &Matrix) -> C64 {
    let s: C64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| y.conj() * x)
        .sum();
    s / a.rows() as f64
}

/// Trace norm `τ(|a|) = Σσᵢ/m`.
pub fn trace_norm(a: &Matrix) -> f64 {
    let s = svd(a);
    s.singular_values.iter().sum::<f64>() / a.rows() as f64
}

/// Largest singular value.
pub fn operator_norm(a: &Matrix) -> f64 {
    svd(a).singular_values.first().copied().unwrap_or(0.0)
}

/// Spectral decomposition `a = U Λ U*` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Eigh {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: Matrix,
}

impl Eigh {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Σ f(λᵢ) uᵢuᵢ*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let m = self.vectors.rows();
        let mut out = Matrix::zeros(m, m);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..m {
                let ui = self.vectors[(i, k)] * w;
                if ui == ZERO {
                    continue;
                }
                for j in 0..m {
                    out[(i, j)] += ui * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn eigh(a: &Matrix) -> Result<Eigh> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let scale = a.hs_norm();
    let residual = a.hermitian_residual();
    if residual > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { residual });
    }
    Ok(jacobi_eigh(a.hermitian_part()))
}

fn jacobi_eigh(mut a: Matrix) -> Eigh {
    let m = a.rows();
    let mut v = Matrix::identity(m);
    let frob = a.frobenius();
    if frob > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..m {
                for q in (p + 1)..m {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-16 * frob {
                break;
            }
            for p in 0..m {
                for q in (p + 1)..m {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = Matrix::from_fn(m, m, |i, k| v[(i, order[k])]);
    Eigh { values, vectors }
}

/// Annihilates `a[p][q]` with the unitary `G = diag(1, ē) · [[c, s], [−s, c]]`
/// acting on coordinates `p, q`, where `e` is the phase of `a[p][q]`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if b <= 1e-300 || b < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let e = apq / b;
    let theta = (aqq - app) / (2.0 * b);
    let t = if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let g_pp = C64::new(c, 0.0);
    let g_pq = C64::new(s, 0.0);
    let g_qp = e.conj() * (-s);
    let g_qq = e.conj() * c;
    let m = a.rows();
    for k in 0..m {
        let (x, y) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = x * g_pp + y * g_qp;
        a[(k, q)] = x * g_pq + y * g_qq;
        let (x, y) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = x * g_pp + y * g_qp;
        v[(k, q)] = x * g_pq + y * g_qq;
    }
    for k in 0..m {
        let (x, y) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = g_pp.conj() * x + g_qp.conj() * y;
        a[(q, k)] = g_pq.conj() * x + g_qq.conj() * y;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

/// Thin singular value decomposition `a = U Σ V*`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: Matrix,
    /// Descending, length `k`.
    pub singular_values: Vec<f64>,
    /// `cols × k` with orthonormal columns.
    pub v: Matrix,
}

/// SVD from the eigendecomposition of the smaller Gram matrix. Singular
/// values are recomputed as `‖a vᵢ‖` so that small ones keep absolute
/// accuracy `O(ε‖a‖)` instead of `O(√ε‖a‖)`.
pub fn svd(a: &Matrix) -> Svd {
    if a.rows() < a.cols() {
        let t = svd(&a.adjoint());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (rows, k) = (a.rows(), a.cols());
    let gram = a.adjoint_mul(a);
    let eig = jacobi_eigh(gram.hermitian_part());
    let av = a * &eig.vectors;
    let mut triples: Vec<(f64, Vec<C64>, Vec<C64>)> = (0..k)
        .map(|j| {
            let col = av.column(j);
            (vec_norm(&col), col, eig.vectors.column(j))
        })
        .collect();
    triples.sort_by(|x, y| y.0.total_cmp(&x.0));
    let smax = triples.first().map(|t| t.0).unwrap_or(0.0);
    let floor = smax * f64::EPSILON * (rows.max(k) as f64);
    let mut us: Vec<Vec<C64>> = Vec::with_capacity(k);
    for (sigma, col, _) in &triples {
        let mut u: Vec<C64> = if *sigma > floor && *sigma > 0.0 {
            col.iter().map(|z| z / *sigma).collect()
        } else {
            Vec::new()
        };
        if !u.is_empty() {
            let n = gram_schmidt_step(&mut u, &us);
            if n > 0.5 {
                u.iter_mut().for_each(|z| *z /= n);
                us.push(u);
                continue;
            }
        }
        us.push(complete_basis(rows, &us));
    }
    let singular_values = triples.iter().map(|t| t.0).collect();
    let vcols: Vec<Vec<C64>> = triples.into_iter().map(|t| t.2).collect();
    Svd {
        u: Matrix::from_columns(rows, &us),
        singular_values,
        v: Matrix::from_columns(k, &vcols),
    }
}

/// Two passes of classical Gram–Schmidt against orthonormal `basis`; returns the residual norm.
fn gram_schmidt_step(x: &mut [C64], basis: &[Vec<C64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c: C64 = b.iter().zip(x.iter()).map(|(bi, xi)| bi.conj() * xi).sum();
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi -= c * bi;
            }
        }
    }
    vec_norm(x)
}

/// A unit vector orthogonal to `basis`, taken from the standard basis.
fn complete_basis(dim: usize, basis: &[Vec<C64>]) -> Vec<C64> {
    let mut best: Option<(f64, Vec<C64>)> = None;
    for i in 0..dim {
        let mut e = alloc::vec![ZERO; dim];
        e[i] = ONE;
        let n = gram_schmidt_step(&mut e, basis);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, e));
        }
        if n > 0.7 {
            break;
        }
    }
    let (n, mut e) = best.unwrap_or((1.0, alloc::vec![ZERO; dim]));
    if n > 0.0 {
        e.iter_mut().for_each(|z| *z /= n);
    }
    e
}

/// Range projection of a positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct RangeProjection {
    /// `R = Σ uᵢuᵢ*` over the retained eigenvalues.
    pub projection: Matrix,
    pub rank: usize,
    /// `m × rank`, orthonormal columns spanning the range.
    pub basis: Matrix,
    pub eigen: Eigh,
}

/// Projection onto the span of eigenvectors with `λ > rank_tol·λ_max`.
pub fn range_projection(h: &Matrix, rank_tol: f64) -> Result<RangeProjection> {
    let eigen = eigh(h)?;
    let lmax = eigen.max();
    let lmin = eigen.min();
    if lmin < 0.0 && lmin < -rank_tol * lmax.max(0.0) {
        return Err(Error::NotPositive {
            min_eigenvalue: lmin,
        });
    }
    let cutoff = rank_tol * lmax;
    let rank = if lmax > 0.0 {
        eigen.values.iter().take_while(|&&l| l > cutoff).count()
    } else {
        0
    };
    let m = h.rows();
    let basis = Matrix::from_fn(m, rank, |i, k| eigen.vectors[(i, k)]);
    let projection = basis.matmul(&basis.adjoint());
    Ok(RangeProjection {
        projection,
        rank,
        basis,
        eigen,
    })
}

fn check_psd(eigen: &Eigh) -> Result<()> {
    let lmax = eigen.max().max(0.0);
    let lmin = eigen.min();
    if lmin < -PSD_TOL * lmax || (lmax == 0.0 && lmin < 0.0) {
        return Err(Error::NotPositive {
            min_eigenvalue: lmin,
        });
    }
    Ok(())
}

/// Positive square root through the spectral decomposition.
pub fn sqrt_spectral(c: &Matrix) -> Result<Matrix> {
    let eigen = eigh(c)?;
    check_psd(&eigen)?;
    Ok(eigen.map(|l| l.max(0.0).sqrt()).hermitian_part())
}

/// Positive square root by the fixed-point iteration
/// `C₀ = 0, C_{j+1} = C_j + ½(C − C_j²)`, which converges monotonically for
/// `0 ≤ C ≤ I`. The input is rescaled by its Frobenius norm (an upper bound on
/// the spectral norm) and the result unscaled by the square root of that factor.
///
/// Convergence is `O(1/j)` on eigenvalues near zero, so nearly singular
/// inputs need many iterations; `NoConvergence` reports the final residual.
pub fn sqrt_sznagy(c: &Matrix, max_iters: usize, tol: f64) -> Result<Matrix> {
    let eigen = eigh(c)?;
    check_psd(&eigen)?;
    let m = c.rows();
    let s = c.frobenius();
    if s == 0.0 {
        return Ok(Matrix::zeros(m, m));
    }
    let target = c.hermitian_part().scale_real(1.0 / s);
    let bound = tol * c.hs_norm().max(1.0) / s;
    let mut y = Matrix::zeros(m, m);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let diff = &target - &(&y * &y);
        residual = diff.hs_norm();
        if residual <= bound {
            return Ok(y.scale_real(s.sqrt()));
        }
        y.axpy(C64::new(0.5, 0.0), &diff);
        y = y.hermitian_part();
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        residual: residual * s,
    })
}

/// An HS-orthonormal family of `side × side` matrices.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubspaceBasis {
    side: usize,
    vectors: Vec<Matrix>,
}

impl SubspaceBasis {
    pub fn empty(side: usize) -> Self {
        Self {
            side,
            vectors: Vec::new(),
        }
    }

    /// Wraps vectors already known to be HS-orthonormal.
    pub(crate) fn from_orthonormal(side: usize, vectors: Vec<Matrix>) -> Self {
        Self { side, vectors }
    }

    /// Matrix side length `m`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Complex dimension `m²` of the ambient space.
    pub fn ambient_dim(&self) -> usize {
        self.side * self.side
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Matrix] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Matrix> {
        self.vectors
    }

    /// Orthogonal projection of `x` onto the span.
    pub fn project(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.side, self.side);
        for v in &self.vectors {
            out.axpy(hs_inner_unchecked(x, v), v);
        }
        out
    }

    /// `‖x − Πx‖₂`.
    pub fn distance(&self, x: &Matrix) -> f64 {
        (x - &self.project(x)).hs_norm()
    }

    /// `max |G − I|` over the Gram matrix.
    pub fn gram_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate().skip(i) {
                let g = hs_inner_unchecked(a, b);
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// Modified Gram–Schmidt (with re-orthogonalization) in the HS inner product.
/// Vectors whose residual falls below `1e-10` of their original norm are dropped.
pub fn orthonormalize(vs: &[Matrix]) -> Result<SubspaceBasis> {
    let Some(first) = vs.first() else {
        return Ok(SubspaceBasis::empty(0));
    };
    let side = first.rows();
    // Dependence is judged against the largest input so that round-off sized
    // inputs are dropped rather than normalized.
    let scale = vs.iter().map(Matrix::hs_norm).fold(0.0, f64::max);
    let mut out: Vec<Matrix> = Vec::new();
    for v in vs {
        if v.rows() != side || v.cols() != side {
            return Err(Error::DimensionMismatch {
                expected: side,
                found: v.rows(),
            });
        }
        if v.hs_norm() == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &out {
                let c = hs_inner_unchecked(&w, b);
                w.axpy(-c, b);
            }
        }
        let norm = w.hs_norm();
        if norm < DEPENDENCE_TOL * scale {
            continue;
        }
        out.push(w.scale_real(1.0 / norm));
    }
    Ok(SubspaceBasis::from_orthonormal(side, out))
}

/// Cosines of the principal angles between two subspaces, descending, together
/// with the matching principal vectors in the span of `a`.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<(Vec<f64>, Vec<Matrix>)> {
    if a.is_empty() || b.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    if a.side != b.side {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            found: b.ambient_dim(),
        });
    }
    let cross = Matrix::from_fn(a.len(), b.len(), |i, j| {
        hs_inner_unchecked(&b.vectors[j], &a.vectors[i])
    });
    let dec = svd(&cross);
    let vectors = (0..dec.singular_values.len())
        .map(|k| {
            let mut x = Matrix::zeros(a.side, a.side);
            for (i, ai) in a.vectors.iter().enumerate() {
                x.axpy(dec.u[(i, k)], ai);
            }
            x
        })
        .collect();
    Ok((dec.singular_values, vectors))
}

/// Intersection of two spans: principal vectors whose cosine is at least `1 − angle_tol`.
pub fn subspace_intersection(
    a: &SubspaceBasis,
    b: &SubspaceBasis,
    angle_tol: f64,
) -> Result<SubspaceBasis> {
    if a.side != b.side && !a.is_empty() && !b.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            found: b.ambient_dim(),
        });
    }
    let (cosines, vectors) = principal_angles(a, b)?;
    let keep = cosines
        .iter()
        .take_while(|&&c| c >= 1.0 - angle_tol)
        .count();
    let vectors: Vec<Matrix> = vectors.into_iter().take(keep).collect();
    if vectors.is_empty() {
        return Ok(SubspaceBasis::empty(a.side.max(b.side)));
    }
    orthonormalize(&vectors)
}
