//! Extremality and purity certificates for marginal tracial states.
//!
//! Two independent extremality tests are provided:
//!
//! - [`test_extremal_t23`]: `h` is extreme iff the compression space
//!   `R(B⊗B)R` (with `R` the range projection of `h`) meets `V = N⊗N` only
//!   in `{0}`. Computed with principal angles between two HS-orthonormal bases.
//! - [`test_extremal_a2`]: writes `h` in the permuted block form
//!   `[K, KA; A*K, A*KA]` and looks for a nonzero Hermitian `L` whose
//!   assembled matrix `[L, LA; A*L, A*LA]` lies in `V`. This is a real-linear
//!   null-space computation over `r²` parameters against `2n² − 1` constraints.
//!
//! Purity of an extreme point is then decided by whether `I − (P−Q)²` maps
//! the compression space into itself ([`test_pure_t29`]), with the four
//! equivalent conditions of [`test_pure_c210`] evaluated as a cross-check.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

// Unused when std is linked in (e.g. via dev-dependencies); needed for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::hsspace::{
    eigh, hs_inner_unchecked, orthonormalize, principal_angles, range_projection, svd,
    RangeProjection, SubspaceBasis,
};
use crate::margstates::{
    basis_offdiag, basis_v, check_marginal, p_plus_q, proj_ci_plus_v, proj_offdiag, proj_v,
    StateElement,
};
use crate::matrix::{Matrix, C64, ONE};
use crate::{Error, Result, Tolerances};

/// Residual allowed for a returned witness (`RvR = v`, `(P+Q)v = 0`).
pub const WITNESS_TOL: f64 = 1e-8;
/// Projection gate for [`compression_basis`].
pub const PROJECTION_TOL: f64 = 1e-10;
/// Block-form reassembly tolerance relative to `‖h‖₂`.
pub const BLOCK_TOL: f64 = 1e-10;

/// HS-orthonormal basis `{√m·uᵢuⱼ*}` of `R(B⊗B)R`, given a rank-`r` projection `R`.
pub fn compression_basis(r_proj: &Matrix, rank: usize) -> Result<SubspaceBasis> {
    let m = r_proj.rows();
    let residual = (&(r_proj * r_proj) - r_proj)
        .hs_norm()
        .max(r_proj.hermitian_residual());
    let trace_gap = (r_proj.trace().re - rank as f64).abs();
    if !r_proj.is_square() || residual > PROJECTION_TOL || trace_gap > 1e-8 {
        return Err(Error::NotProjection { rank, residual });
    }
    let eig = eigh(r_proj)?;
    let range = Matrix::from_fn(m, rank, |i, k| eig.vectors[(i, k)]);
    Ok(compression_basis_from_range(&range))
}

/// Compression basis from an `m × r` matrix with orthonormal columns.
pub fn compression_basis_from_range(range: &Matrix) -> SubspaceBasis {
    let m = range.rows();
    let r = range.cols();
    let scale = (m as f64).sqrt();
    let cols: Vec<Vec<C64>> = (0..r).map(|k| range.column(k)).collect();
    let mut out = Vec::with_capacity(r * r);
    for ui in &cols {
        for uj in &cols {
            out.push(Matrix::outer(ui, uj).scale_real(scale));
        }
    }
    SubspaceBasis::from_orthonormal(m, out)
}

/// `R x R`.
pub fn compress(r_proj: &Matrix, x: &Matrix) -> Matrix {
    &(r_proj * x) * r_proj
}

#[derive(Clone, Debug)]
pub struct T23Result {
    pub extremal: bool,
    pub rank: usize,
    pub intersection_dim: usize,
    /// Hermitian, unit HS norm, in `R(B⊗B)R ∩ V`; present iff `intersection_dim > 0`.
    pub witness: Option<Matrix>,
    /// Largest principal cosine that was *not* counted as an intersection (0 if none).
    pub next_cosine: f64,
    /// `max(‖v − RvR‖₂, ‖(P+Q)v‖₂)` for the witness.
    pub witness_residual: Option<f64>,
}

fn require_marginal(h: &StateElement, tols: &Tolerances) -> Result<()> {
    let report = check_marginal(h, tols.tol);
    if !report.is_marginal_tracial {
        return Err(Error::NotMarginal {
            residual: report.max_residual(),
        });
    }
    Ok(())
}

/// Extremality through `R(B⊗B)R ∩ V = {0}`.
pub fn test_extremal_t23(h: &StateElement, tols: &Tolerances) -> Result<T23Result> {
    require_marginal(h, tols)?;
    let rp = range_projection(h.matrix(), tols.rank_tol)?;
    t23_with_range(h.n(), &rp, tols)
}

pub(crate) fn t23_with_range(
    n: usize,
    rp: &RangeProjection,
    tols: &Tolerances,
) -> Result<T23Result> {
    let comp = compression_basis_from_range(&rp.basis);
    let v_basis = basis_v(n);
    let (cosines, vectors) = principal_angles(&comp, &v_basis)?;
    let keep = cosines
        .iter()
        .take_while(|&&c| c >= 1.0 - tols.angle_tol)
        .count();
    let next_cosine = cosines.get(keep).copied().unwrap_or(0.0);
    let (witness, witness_residual) = if keep > 0 {
        let inter = orthonormalize(&vectors[..keep])?;
        let first = inter
            .vectors()
            .first()
            .ok_or(Error::Inconsistent("empty intersection basis"))?;
        let v = polish_witness(&hermitize(first), &rp.projection, n)?;
        let res = witness_residual(&v, &rp.projection, n)?;
        (Some(v), Some(res))
    } else {
        (None, None)
    };
    Ok(T23Result {
        extremal: keep == 0,
        rank: rp.rank,
        intersection_dim: keep,
        witness,
        next_cosine,
        witness_residual,
    })
}

/// `(w + w*)/‖·‖₂` or `i(w − w*)/‖·‖₂`, whichever is larger before normalizing.
pub fn hermitize(w: &Matrix) -> Matrix {
    let wa = w.adjoint();
    let sym = w + &wa;
    let anti = (w - &wa).scale(C64::new(0.0, 1.0));
    let (x, norm) = if sym.hs_norm() >= anti.hs_norm() {
        let nn = sym.hs_norm();
        (sym, nn)
    } else {
        let nn = anti.hs_norm();
        (anti, nn)
    };
    x.scale_real(1.0 / norm).hermitian_part()
}

/// Alternating projections onto `V` and `R(B⊗B)R`, keeping the witness Hermitian.
fn polish_witness(v: &Matrix, r_proj: &Matrix, n: usize) -> Result<Matrix> {
    let mut v = v.clone();
    for _ in 0..8 {
        let res = witness_residual(&v, r_proj, n)?;
        if res < 1e-14 {
            break;
        }
        let w = compress(r_proj, &proj_v(&v, n)?).hermitian_part();
        let norm = w.hs_norm();
        if norm == 0.0 {
            break;
        }
        v = w.scale_real(1.0 / norm);
    }
    Ok(v)
}

/// `max(‖v − RvR‖₂, ‖(P+Q)v‖₂)`.
pub fn witness_residual(v: &Matrix, r_proj: &Matrix, n: usize) -> Result<f64> {
    let c = (v - &compress(r_proj, v)).hs_norm();
    let pq = p_plus_q(v, n)?.hs_norm();
    Ok(c.max(pq))
}

/// Permuted block form `σ h σ⁻¹ = [K, KA; A*K, A*KA]` of a rank-`r` PSD matrix.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockForm {
    /// `(σ h σ⁻¹)[a][b] = h[perm[a]][perm[b]]`; the first `r` entries index `K`.
    pub perm: Vec<usize>,
    /// `r × r`, positive definite.
    pub k: Matrix,
    /// `r × (m − r)`.
    pub a: Matrix,
    /// `‖h − σ⁻¹[K, KA; A*K, A*KA]σ‖₂`.
    pub residual: f64,
}

impl BlockForm {
    pub fn rank(&self) -> usize {
        self.k.rows()
    }

    /// `σ⁻¹ [L, LA; A*L, A*LA] σ` for an `r × r` matrix `L`.
    pub fn assemble(&self, l: &Matrix) -> Matrix {
        let m = self.perm.len();
        let r = self.rank();
        // [I, A] as an r × m matrix; the block is [I; A*] L [I, A].
        let mut top = Matrix::zeros(r, m);
        for i in 0..r {
            top[(i, i)] = ONE;
            for j in r..m {
                top[(i, j)] = self.a[(i, j - r)];
            }
        }
        let blk = top.adjoint().matmul(&l.matmul(&top));
        let mut out = Matrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                out[(self.perm[a], self.perm[b])] = blk[(a, b)];
            }
        }
        out
    }
}

/// Block form by complete-pivoting (pivoted Cholesky) selection of `r` indices.
pub fn block_form(h: &Matrix, rank_tol: f64) -> Result<BlockForm> {
    let rp = range_projection(h, rank_tol)?;
    let m = h.rows();
    let r = rp.rank;
    if r == m {
        return Err(Error::FullRank);
    }
    if r == 0 {
        return Err(Error::DefectiveBlock { rank: 0 });
    }
    let lmax = rp.eigen.max();
    let mut schur = h.hermitian_part();
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut selected = Vec::with_capacity(r);
    for _ in 0..r {
        let (pos, &piv) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| schur[(*x.1, *x.1)].re.total_cmp(&schur[(*y.1, *y.1)].re))
            .ok_or(Error::DefectiveBlock { rank: r })?;
        let d = schur[(piv, piv)].re;
        if d <= rank_tol * lmax {
            return Err(Error::DefectiveBlock { rank: r });
        }
        remaining.remove(pos);
        selected.push(piv);
        let col: Vec<C64> = (0..m).map(|i| schur[(i, piv)]).collect();
        for &i in &remaining {
            for &j in &remaining {
                schur[(i, j)] -= col[i] * col[j].conj() / d;
            }
        }
    }
    remaining.sort_unstable();
    let k = h.select(&selected, &selected).hermitian_part();
    let kmin = eigh(&k)?.min();
    if kmin <= 0.0 {
        return Err(Error::DefectiveBlock { rank: r });
    }
    let a = k.inverse()?.matmul(&h.select(&selected, &remaining));
    let mut perm = selected;
    perm.extend_from_slice(&remaining);
    let mut bf = BlockForm {
        perm,
        k,
        a,
        residual: 0.0,
    };
    bf.residual = (&bf.assemble(&bf.k) - h).hs_norm();
    if bf.residual > BLOCK_TOL * h.hs_norm().max(1.0) {
        return Err(Error::DefectiveBlock { rank: r });
    }
    Ok(bf)
}

/// Frobenius-orthonormal Hermitian basis of `r × r` matrices (`r²` elements).
pub fn hermitian_basis(r: usize) -> Vec<Matrix> {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        out.push(Matrix::unit(r, i, i));
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let mut sym = Matrix::zeros(r, r);
            sym[(i, j)] = C64::new(s, 0.0);
            sym[(j, i)] = C64::new(s, 0.0);
            out.push(sym);
            let mut anti = Matrix::zeros(r, r);
            anti[(i, j)] = C64::new(0.0, s);
            anti[(j, i)] = C64::new(0.0, -s);
            out.push(anti);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct A2Result {
    pub extremal: bool,
    pub rank: usize,
    /// Real dimension of the Hermitian `L` solving the membership constraints.
    pub kernel_dim: usize,
    /// Hermitian `r × r`, present iff `kernel_dim > 0`.
    pub l_witness: Option<Matrix>,
    /// Assembled witness, unit HS norm.
    pub witness: Option<Matrix>,
    pub block_residual: f64,
    /// Smallest singular value counted as nonzero, relative to the largest.
    pub smallest_kept_sigma: f64,
}

/// Extremality through the block-form criterion.
pub fn test_extremal_a2(h: &StateElement, tols: &Tolerances) -> Result<A2Result> {
    require_marginal(h, tols)?;
    let n = h.n();
    let bf = block_form(h.matrix(), tols.rank_tol)?;
    let r = bf.rank();
    let mut constraints: Vec<Matrix> = Vec::with_capacity(2 * n * n - 1);
    constraints.push(Matrix::identity(n * n));
    constraints.extend(basis_offdiag(n).into_vectors());

    let herm = hermitian_basis(r);
    let assembled: Vec<Matrix> = herm.iter().map(|l| bf.assemble(l)).collect();
    let norms: Vec<f64> = assembled.iter().map(|d| d.hs_norm()).collect();
    let cmat = Matrix::from_fn(constraints.len(), herm.len(), |j, k| {
        C64::new(
            hs_inner_unchecked(&assembled[k], &constraints[j]).re / norms[k],
            0.0,
        )
    });
    let dec = svd(&cmat);
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let nonzero = dec
        .singular_values
        .iter()
        .filter(|&&s| s >= tols.null_tol * smax && s > 0.0)
        .count();
    let kernel_dim = herm.len() - nonzero;
    let smallest_kept_sigma = if nonzero > 0 && smax > 0.0 {
        dec.singular_values[nonzero - 1] / smax
    } else {
        0.0
    };

    let (l_witness, witness) = if kernel_dim > 0 {
        let gram = cmat.adjoint_mul(&cmat).hermitian_part();
        let eig = eigh(&gram)?;
        let last = eig.values.len() - 1;
        let mut l = Matrix::zeros(r, r);
        for (k, hk) in herm.iter().enumerate() {
            l.axpy(C64::new(eig.vectors[(k, last)].re / norms[k], 0.0), hk);
        }
        let d = bf.assemble(&l);
        let scale = d.hs_norm();
        if scale == 0.0 {
            return Err(Error::Inconsistent("block-form witness vanished"));
        }
        (
            Some(l.scale_real(1.0 / scale)),
            Some(d.scale_real(1.0 / scale).hermitian_part()),
        )
    } else {
        (None, None)
    };
    Ok(A2Result {
        extremal: kernel_dim == 0,
        rank: r,
        kernel_dim,
        l_witness,
        witness,
        block_residual: bf.residual,
        smallest_kept_sigma,
    })
}

#[derive(Clone, Debug)]
pub struct T29Result {
    pub pure: bool,
    /// `max_b ‖Π(b) − RΠ(b)R‖₂` over the compression basis, `Π = I − (P−Q)²`.
    pub max_leak: f64,
    /// `max_b ‖Π(b) − τ(b)h‖₂`; evaluated only on a pure verdict.
    pub projection_residual: Option<f64>,
}

fn require_extremal(h: &StateElement, tols: &Tolerances) -> Result<RangeProjection> {
    require_marginal(h, tols)?;
    let rp = range_projection(h.matrix(), tols.rank_tol)?;
    if !t23_with_range(h.n(), &rp, tols)?.extremal {
        return Err(Error::NotExtremal);
    }
    Ok(rp)
}

/// Purity of an extreme point: `Π(R(B⊗B)R) ⊆ R(B⊗B)R`.
pub fn test_pure_t29(h: &StateElement, tols: &Tolerances) -> Result<T29Result> {
    let rp = require_extremal(h, tols)?;
    t29_with_range(h, &rp, tols)
}

fn t29_with_range(h: &StateElement, rp: &RangeProjection, tols: &Tolerances) -> Result<T29Result> {
    let n = h.n();
    let comp = compression_basis_from_range(&rp.basis);
    let projected: Vec<Matrix> = comp
        .vectors()
        .iter()
        .map(|b| proj_ci_plus_v(b, n))
        .collect::<Result<_>>()?;
    let max_leak = projected
        .iter()
        .map(|p| (p - &compress(&rp.projection, p)).hs_norm())
        .fold(0.0, f64::max);
    let pure = max_leak <= tols.tol;
    let projection_residual = if pure {
        let mut worst: f64 = 0.0;
        for (b, p) in comp.vectors().iter().zip(&projected) {
            let mut d = p.clone();
            d.axpy(-b.tau(), h.matrix());
            worst = worst.max(d.hs_norm());
        }
        Some(worst)
    } else {
        None
    };
    Ok(T29Result {
        pure,
        max_leak,
        projection_residual,
    })
}

/// The four purity conditions equivalent to purity of an extreme point.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct C210Result {
    /// `Π(k) = τ(k)·Π(h)` for `k ∈ R(B⊗B)R`.
    pub restriction_proportional: bool,
    /// `Π(h^{1/2} w h^{1/2}) = 0` for `w ∈ N⊗I + I⊗N`.
    pub restriction_vanishes: bool,
    /// `h^{1/2}(N⊗I + I⊗N)h^{1/2} ⊆ N⊗I + I⊗N`.
    pub offdiag_invariant: bool,
    /// `h^{1/2}(ℂI + V)h^{1/2} ⊆ ℂI + V`.
    pub ci_plus_v_invariant: bool,
    pub residuals: [f64; 4],
}

impl C210Result {
    pub fn all(&self) -> bool {
        self.restriction_proportional
            && self.restriction_vanishes
            && self.offdiag_invariant
            && self.ci_plus_v_invariant
    }

    pub fn any(&self) -> bool {
        self.restriction_proportional
            || self.restriction_vanishes
            || self.offdiag_invariant
            || self.ci_plus_v_invariant
    }

    pub fn as_map(&self) -> BTreeMap<String, bool> {
        [
            ("restriction_proportional", self.restriction_proportional),
            ("restriction_vanishes", self.restriction_vanishes),
            ("offdiag_invariant", self.offdiag_invariant),
            ("ci_plus_v_invariant", self.ci_plus_v_invariant),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

pub fn test_pure_c210(h: &StateElement, tols: &Tolerances) -> Result<C210Result> {
    let rp = require_extremal(h, tols)?;
    c210_with_range(h, &rp, tols)
}

fn c210_with_range(
    h: &StateElement,
    rp: &RangeProjection,
    tols: &Tolerances,
) -> Result<C210Result> {
    let n = h.n();
    let hm = h.matrix();
    let scale = hm.hs_norm().max(1.0);
    let thresh = tols.tol * scale;
    // Square root on the detected range; kernel round-off would otherwise enter as its square root.
    let cut = rp.eigen.max() * tols.rank_tol;
    let hs = rp.eigen.map(|x| if x > cut { x.sqrt() } else { 0.0 });
    let pih = proj_ci_plus_v(hm, n)?;

    let mut r_ii: f64 = 0.0;
    for k in compression_basis_from_range(&rp.basis).vectors() {
        let mut d = proj_ci_plus_v(k, n)?;
        d.axpy(-k.tau(), &pih);
        r_ii = r_ii.max(d.hs_norm());
    }

    let mut r_iii: f64 = 0.0;
    let mut r_iv: f64 = 0.0;
    for w in basis_offdiag(n).vectors() {
        let x = &(&hs * w) * &hs;
        r_iii = r_iii.max(proj_ci_plus_v(&x, n)?.hs_norm());
        r_iv = r_iv.max((&x - &proj_offdiag(&x, n)?).hs_norm());
    }

    let mut r_v: f64 = 0.0;
    let id = Matrix::identity(n * n);
    for c in core::iter::once(&id).chain(basis_v(n).vectors()) {
        let y = &(&hs * c) * &hs;
        r_v = r_v.max(proj_offdiag(&y, n)?.hs_norm());
    }

    Ok(C210Result {
        restriction_proportional: r_ii <= tols.tol,
        restriction_vanishes: r_iii <= thresh,
        offdiag_invariant: r_iv <= thresh,
        ci_plus_v_invariant: r_v <= thresh,
        residuals: [r_ii, r_iii, r_iv, r_v],
    })
}

/// Dimension of `span{RxR : x ∈ {I} ∪ basis(N⊗I + I⊗N)}`.
pub fn compressed_marginal_span_dim(r_proj: &Matrix, n: usize) -> Result<usize> {
    let mut xs: Vec<Matrix> = Vec::with_capacity(2 * n * n - 1);
    xs.push(compress(r_proj, &Matrix::identity(n * n)));
    for w in basis_offdiag(n).vectors() {
        xs.push(compress(r_proj, w));
    }
    Ok(orthonormalize(&xs)?.len())
}

/// Audit record combining marginality, both extremality tests and purity.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    pub n: usize,
    pub rank: usize,
    pub verdict_marginal: bool,
    pub verdict_extremal_t23: Option<bool>,
    pub verdict_extremal_a2: Option<bool>,
    pub verdict_pure: Option<bool>,
    pub intersection_dim: Option<usize>,
    pub block_kernel_dim: Option<usize>,
    /// Nonzero Hermitian element of `R(B⊗B)R ∩ V` when non-extremal.
    pub witness: Option<Matrix>,
    pub purity_conditions: Option<C210Result>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Disagreements between tests that should be equivalent; empty when consistent.
    pub inconsistencies: Vec<String>,
}

impl Certificate {
    pub fn is_consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }

    /// Both extremality tests agree on "extremal".
    pub fn is_extremal(&self) -> bool {
        self.verdict_extremal_t23 == Some(true) && self.verdict_extremal_a2 == Some(true)
    }

    pub fn tests_agree(&self) -> bool {
        self.verdict_extremal_t23 == self.verdict_extremal_a2
    }
}

pub fn tolerance_map(tols: &Tolerances) -> BTreeMap<String, f64> {
    [
        ("tol", tols.tol),
        ("rank_tol", tols.rank_tol),
        ("angle_tol", tols.angle_tol),
        ("null_tol", tols.null_tol),
        ("witness_tol", WITNESS_TOL),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Runs every applicable test and records verdicts, residuals and tolerances.
/// Full-rank states skip the block form: they are never extremal, and the
/// block-form kernel is all Hermitian elements of `V`, of real dimension `(n²−1)²`.
pub fn certify(h: &StateElement, tols: &Tolerances) -> Certificate {
    let n = h.n();
    let m = n * n;
    let mut residuals = BTreeMap::new();
    let mut inconsistencies = Vec::new();
    let report = check_marginal(h, tols.tol);
    residuals.insert("marginal_p".to_string(), report.p_residual);
    residuals.insert("marginal_q".to_string(), report.q_residual);
    residuals.insert("marginal_offdiag".to_string(), report.offdiag_residual);
    let mut cert = Certificate {
        n,
        rank: 0,
        verdict_marginal: report.is_marginal_tracial,
        verdict_extremal_t23: None,
        verdict_extremal_a2: None,
        verdict_pure: None,
        intersection_dim: None,
        block_kernel_dim: None,
        witness: None,
        purity_conditions: None,
        residuals: BTreeMap::new(),
        tolerances: tolerance_map(tols),
        inconsistencies: Vec::new(),
    };
    let rp = match range_projection(h.matrix(), tols.rank_tol) {
        Ok(rp) => rp,
        Err(e) => {
            inconsistencies.push(format!("range projection: {e}"));
            cert.residuals = residuals;
            cert.inconsistencies = inconsistencies;
            return cert;
        }
    };
    cert.rank = rp.rank;
    if !report.is_marginal_tracial {
        cert.residuals = residuals;
        return cert;
    }
    if report.offdiag_residual > tols.tol * 10.0 {
        inconsistencies.push("marginal state has a (P-Q)^2 component".to_string());
    }

    match t23_with_range(n, &rp, tols) {
        Ok(t) => {
            cert.verdict_extremal_t23 = Some(t.extremal);
            cert.intersection_dim = Some(t.intersection_dim);
            residuals.insert("t23_next_cosine".to_string(), t.next_cosine);
            if let Some(res) = t.witness_residual {
                residuals.insert("witness_residual".to_string(), res);
                if res > WITNESS_TOL {
                    inconsistencies.push("witness fails membership checks".to_string());
                }
            }
            cert.witness = t.witness;
        }
        Err(e) => inconsistencies.push(format!("t23: {e}")),
    }

    if rp.rank == m {
        cert.verdict_extremal_a2 = Some(false);
        cert.block_kernel_dim = Some((m - 1) * (m - 1));
    } else {
        match test_extremal_a2(h, tols) {
            Ok(a) => {
                cert.verdict_extremal_a2 = Some(a.extremal);
                cert.block_kernel_dim = Some(a.kernel_dim);
                residuals.insert("a2_block_residual".to_string(), a.block_residual);
                residuals.insert("a2_smallest_kept_sigma".to_string(), a.smallest_kept_sigma);
                if let Some(w) = &a.witness {
                    match witness_residual(w, &rp.projection, n) {
                        Ok(res) => {
                            residuals.insert("a2_witness_residual".to_string(), res);
                            if res > WITNESS_TOL {
                                inconsistencies.push(
                                    "block-form witness fails membership checks".to_string(),
                                );
                            }
                        }
                        Err(e) => inconsistencies.push(format!("a2 witness: {e}")),
                    }
                    if cert.witness.is_none() {
                        cert.witness = Some(w.clone());
                    }
                }
            }
            Err(e) => inconsistencies.push(format!("a2: {e}")),
        }
    }

    if let (Some(a), Some(b)) = (cert.verdict_extremal_t23, cert.verdict_extremal_a2) {
        if a != b {
            inconsistencies.push("extremality tests disagree".to_string());
        }
    }

    if cert.is_extremal() {
        if rp.rank >= m || rp.rank * rp.rank > 2 * m - 1 {
            inconsistencies.push("extremal verdict violates the rank bound".to_string());
        }
        match compressed_marginal_span_dim(&rp.projection, n) {
            Ok(d) => {
                residuals.insert("compressed_marginal_span_dim".to_string(), d as f64);
                if d != rp.rank * rp.rank {
                    inconsistencies
                        .push("compressed marginal span is not the full compression".to_string());
                }
            }
            Err(e) => inconsistencies.push(format!("span check: {e}")),
        }
        match t29_with_range(h, &rp, tols) {
            Ok(t) => {
                cert.verdict_pure = Some(t.pure);
                residuals.insert("t29_max_leak".to_string(), t.max_leak);
                if let Some(e) = t.projection_residual {
                    residuals.insert("t29_projection".to_string(), e);
                    if e > tols.tol * h.matrix().hs_norm().max(1.0) {
                        inconsistencies.push(
                            "pure verdict but projected compression is not proportional to h"
                                .to_string(),
                        );
                    }
                }
            }
            Err(e) => inconsistencies.push(format!("t29: {e}")),
        }
        match c210_with_range(h, &rp, tols) {
            Ok(c) => {
                for (name, r) in ["c210_ii", "c210_iii", "c210_iv", "c210_v"]
                    .iter()
                    .zip(c.residuals)
                {
                    residuals.insert(name.to_string(), r);
                }
                if let Some(p) = cert.verdict_pure {
                    if (p && !c.all()) || (!p && c.any()) {
                        inconsistencies.push("purity conditions disagree".to_string());
                    }
                }
                cert.purity_conditions = Some(c);
            }
            Err(e) => inconsistencies.push(format!("c210: {e}")),
        }
    }
    cert.residuals = residuals;
    cert.inconsistencies = inconsistencies;
    cert
}
