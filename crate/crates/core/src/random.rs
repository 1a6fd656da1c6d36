//! Seeded random matrices. Every sampler takes an explicit RNG.

use alloc::vec::Vec;

// Unused when std is linked in (e.g. via dev-dependencies); needed for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{vec_norm, Matrix, C64};

/// Standard complex Gaussian (real and imaginary parts `N(0, 1/2)`).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Matrix {
    random_matrix(rng, m, m).hermitian_part()
}

/// `G G*/m + ridge·I` for a square complex Gaussian `G`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, m: usize, ridge: f64) -> Matrix {
    let g = random_matrix(rng, m, m);
    let mut w = g
        .matmul(&g.adjoint())
        .scale_real(1.0 / m as f64)
        .hermitian_part();
    w.axpy(C64::new(ridge, 0.0), &Matrix::identity(m));
    w
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// diagonal of `R` made positive real (modified Gram–Schmidt yields that form).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let g = random_matrix(rng, n, n);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let mut v = g.column(j);
            for _ in 0..2 {
                for q in &cols {
                    let c: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
            let norm = vec_norm(&v);
            if norm < 1e-8 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|z| *z /= norm);
            cols.push(v);
        }
        if ok {
            return Matrix::from_columns(n, &cols);
        }
    }
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..len).map(|_| complex_gaussian(rng)).collect();
        let n = vec_norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Uniform point of the probability simplex with `k` vertices.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
