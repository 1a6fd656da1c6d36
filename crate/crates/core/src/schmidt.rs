//! Schmidt decomposition of vectors in `ℂⁿ ⊗ ℂⁿ` and the pure marginal
//! tracial states built from unitaries.
//!
//! A vector `ξ` is reshaped to its coefficient matrix `X[i][j] = ξ[i·n + j]`,
//! so `ξ = Σ σ_k u_k ⊗ conj(w_k)` for the SVD `X = U Σ W*`.

use alloc::vec::Vec;

// Unused when std is linked in (e.g. via dev-dependencies); needed for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::hsspace::svd;
use crate::margstates::StateElement;
use crate::matrix::{vec_norm, Matrix, C64, ZERO};
use crate::{Error, Result};

/// Allowed deviation of `‖ξ‖` from 1.
pub const UNIT_TOL: f64 = 1e-10;
/// Unitarity gate for [`pure_mts_from_unitary`] (`‖Λ*Λ − I‖_F`).
pub const UNITARY_TOL: f64 = 1e-10;
/// Maximal-entanglement gate used by [`solve_slice_operator`].
pub const ENTANGLEMENT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SchmidtDecomposition {
    pub n: usize,
    /// Non-negative, descending, `Σ cᵢ² = 1`.
    pub coefficients: Vec<f64>,
    /// `fᵢ`; the first non-negligible component of each is real positive.
    pub left_basis: Vec<Vec<C64>>,
    /// `gᵢ`, carrying the compensating phases.
    pub right_basis: Vec<Vec<C64>>,
    /// Number of coefficients above the tolerance.
    pub schmidt_rank: usize,
}

impl SchmidtDecomposition {
    /// `Σ cᵢ fᵢ ⊗ gᵢ`.
    pub fn reconstruct(&self) -> Vec<C64> {
        let n = self.n;
        let mut out = alloc::vec![ZERO; n * n];
        for ((c, f), g) in self
            .coefficients
            .iter()
            .zip(&self.left_basis)
            .zip(&self.right_basis)
        {
            for i in 0..n {
                let fi = f[i] * *c;
                for j in 0..n {
                    out[i * n + j] += fi * g[j];
                }
            }
        }
        out
    }
}

/// `n` such that `n² = len`.
pub fn side_of(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: len,
        });
    }
    Ok(n)
}

fn check_unit(xi: &[C64]) -> Result<usize> {
    let n = side_of(xi.len())?;
    let norm = vec_norm(xi);
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(n)
}

/// The `n × n` coefficient matrix of a bipartite vector.
pub fn coefficient_matrix(xi: &[C64]) -> Result<Matrix> {
    let n = side_of(xi.len())?;
    Matrix::from_vec(n, n, xi.to_vec())
}

pub fn schmidt_decompose(xi: &[C64], tol: f64) -> Result<SchmidtDecomposition> {
    let n = check_unit(xi)?;
    let x = coefficient_matrix(xi)?;
    let dec = svd(&x);
    let mut left_basis = Vec::with_capacity(n);
    let mut right_basis = Vec::with_capacity(n);
    for k in 0..n {
        let mut f = dec.u.column(k);
        let mut g: Vec<C64> = dec.v.column(k).into_iter().map(|z| z.conj()).collect();
        if let Some(lead) = f.iter().copied().find(|z| z.norm() > 1e-12) {
            let phase = lead / lead.norm();
            f.iter_mut().for_each(|z| *z /= phase);
            g.iter_mut().for_each(|z| *z *= phase);
        }
        left_basis.push(f);
        right_basis.push(g);
    }
    let coefficients = dec.singular_values;
    let schmidt_rank = coefficients.iter().filter(|&&c| c > tol).count();
    Ok(SchmidtDecomposition {
        n,
        coefficients,
        left_basis,
        right_basis,
        schmidt_rank,
    })
}

/// Every Schmidt coefficient within `tol` of `1/√n`.
pub fn is_maximally_entangled(xi: &[C64], tol: f64) -> Result<bool> {
    let dec = schmidt_decompose(xi, tol)?;
    let target = 1.0 / (dec.n as f64).sqrt();
    Ok(dec.coefficients.iter().all(|c| (c - target).abs() <= tol))
}

/// `ξ = Σ λ_ij/√n · eᵢ ⊗ e_j` and `h = n²|ξ⟩⟨ξ|` for a unitary `Λ`.
pub fn pure_mts_from_unitary(lambda: &Matrix) -> Result<(Vec<C64>, StateElement)> {
    if !lambda.is_square() {
        return Err(Error::DimensionMismatch {
            expected: lambda.rows(),
            found: lambda.cols(),
        });
    }
    let n = lambda.rows();
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2"));
    }
    let residual = (&lambda.adjoint_mul(lambda) - &Matrix::identity(n)).frobenius();
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let inv = 1.0 / (n as f64).sqrt();
    let xi: Vec<C64> = lambda.as_slice().iter().map(|z| z * inv).collect();
    let h = Matrix::outer(&xi, &xi).scale_real((n * n) as f64);
    let state = StateElement::new(n, h, 1e-9)?;
    Ok((xi, state))
}

/// `Tr₂|ξ⟩⟨ξ| = X X*`.
fn first_marginal(xi: &[C64]) -> Result<Matrix> {
    let x = coefficient_matrix(xi)?;
    Ok(x.matmul(&x.adjoint()))
}

/// `Tr₁|ξ⟩⟨ξ| = (X* X)ᵀ`.
fn second_marginal(xi: &[C64]) -> Result<Matrix> {
    let x = coefficient_matrix(xi)?;
    Ok(x.adjoint_mul(&x).transpose())
}

/// For a unit vector whose first reduced density is `I/n`, reports whether
/// the second one is `I/n` as well. Errors when the first is not tracial.
pub fn check_remark12(xi: &[C64], tol: f64) -> Result<bool> {
    let n = check_unit(xi)?;
    let target = Matrix::identity(n).scale_real(1.0 / n as f64);
    let residual = (&first_marginal(xi)? - &target).frobenius();
    if residual > tol {
        return Err(Error::MarginalNotTracial { residual });
    }
    Ok((&second_marginal(xi)? - &target).frobenius() <= tol)
}

/// `Φ` with `(Φ ⊗ I)ξ = η`, namely `Φ = Y X⁻¹` for the coefficient matrices
/// of `η` and `ξ`. Requires `ξ` maximally entangled.
pub fn solve_slice_operator(xi: &[C64], eta: &[C64]) -> Result<Matrix> {
    if !is_maximally_entangled(xi, ENTANGLEMENT_TOL)? {
        return Err(Error::NotMaximallyEntangled);
    }
    if eta.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            found: eta.len(),
        });
    }
    let x = coefficient_matrix(xi)?;
    let y = coefficient_matrix(eta)?;
    let phi = y.matmul(&x.inverse()?);
    let residual = vec_distance(&apply_left(&phi, xi), eta);
    if residual > 1e-10 * vec_norm(eta).max(1.0) {
        return Err(Error::Inconsistent("slice operator residual too large"));
    }
    Ok(phi)
}

/// `(Φ ⊗ I)ξ`.
pub fn apply_left(phi: &Matrix, xi: &[C64]) -> Vec<C64> {
    let n = phi.rows();
    let mut out = alloc::vec![ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let p = phi[(i, k)];
            for j in 0..n {
                out[i * n + j] += p * xi[k * n + j];
            }
        }
    }
    out
}

/// `(A ⊗ B)ξ`.
pub fn apply_local(a: &Matrix, b: &Matrix, xi: &[C64]) -> Vec<C64> {
    a.kron(b).apply(xi)
}

/// Euclidean distance between two vectors.
pub fn vec_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `Σ eᵢ ⊗ eᵢ / √n`.
pub fn maximally_entangled(n: usize) -> Vec<C64> {
    let mut xi = alloc::vec![ZERO; n * n];
    let v = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        xi[i * n + i] = C64::new(v, 0.0);
    }
    xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margstates::check_marginal;
    use crate::matrix::ONE;

    fn basis(n: usize, i: usize, j: usize) -> Vec<C64> {
        let mut v = alloc::vec![ZERO; n * n];
        v[i * n + j] = ONE;
        v
    }

    #[test]
    fn product_vector() {
        let d = schmidt_decompose(&basis(3, 0, 0), 1e-12).unwrap();
        assert!((d.coefficients[0] - 1.0).abs() < 1e-15);
        assert!(d.coefficients[1..].iter().all(|c| c.abs() < 1e-15));
        assert_eq!(d.schmidt_rank, 1);
    }

    #[test]
    fn maximally_entangled_coefficients() {
        for n in 2..=4 {
            let d = schmidt_decompose(&maximally_entangled(n), 1e-12).unwrap();
            let t = 1.0 / (n as f64).sqrt();
            assert!(d.coefficients.iter().all(|c| (c - t).abs() < 1e-14));
            assert!(is_maximally_entangled(&maximally_entangled(n), 1e-10).unwrap());
        }
        assert!(!is_maximally_entangled(&basis(2, 0, 0), 1e-10).unwrap());
    }

    #[test]
    fn already_schmidt_form() {
        let mut xi = alloc::vec![ZERO; 4];
        xi[0] = C64::new(3f64.sqrt() / 2.0, 0.0);
        xi[3] = C64::new(0.5, 0.0);
        let d = schmidt_decompose(&xi, 1e-12).unwrap();
        assert!((d.coefficients[0] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((d.coefficients[1] - 0.5).abs() < 1e-15);
        assert!(vec_distance(&d.reconstruct(), &xi) < 1e-15);
        assert!((d.left_basis[0][0] - ONE).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_unit() {
        let v = alloc::vec![ONE; 4];
        assert!(matches!(
            schmidt_decompose(&v, 1e-12),
            Err(Error::NotUnitVector { .. })
        ));
        assert!(schmidt_decompose(&[ONE, ZERO, ZERO], 1e-12).is_err());
    }

    #[test]
    fn pure_from_identity_and_sign_flip() {
        let (xi, h) = pure_mts_from_unitary(&Matrix::identity(3)).unwrap();
        assert!(vec_distance(&xi, &maximally_entangled(3)) < 1e-15);
        assert!(check_marginal(&h, 1e-12).is_marginal_tracial);

        let (xi, h) = pure_mts_from_unitary(&Matrix::diag(&[1.0, -1.0])).unwrap();
        let r = 0.5f64.sqrt();
        let expect = [C64::new(r, 0.0), ZERO, ZERO, C64::new(-r, 0.0)];
        assert!(vec_distance(&xi, &expect) < 1e-15);
        assert!(check_marginal(&h, 1e-12).is_marginal_tracial);

        assert!(matches!(
            pure_mts_from_unitary(&Matrix::diag(&[1.0, 2.0])),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn slice_identity_examples() {
        assert!(check_remark12(&maximally_entangled(3), 1e-12).unwrap());
        assert!(matches!(
            check_remark12(&basis(2, 0, 0), 1e-12),
            Err(Error::MarginalNotTracial { .. })
        ));
    }

    #[test]
    fn slice_operator_examples() {
        let xi = maximally_entangled(3);
        let phi = solve_slice_operator(&xi, &basis(3, 0, 0)).unwrap();
        let expect = Matrix::unit(3, 0, 0).scale_real(3f64.sqrt());
        assert!((&phi - &expect).frobenius() < 1e-14);
        let phi = solve_slice_operator(&xi, &xi).unwrap();
        assert!((&phi - &Matrix::identity(3)).frobenius() < 1e-14);
        assert!(matches!(
            solve_slice_operator(&basis(3, 1, 1), &xi),
            Err(Error::NotMaximallyEntangled)
        ));
    }
}
