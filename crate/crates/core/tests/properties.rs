use mts_core::descent::descend;
use mts_core::extremality::{
    compressed_marginal_span_dim, compression_basis, test_extremal_a2, test_extremal_t23,
    witness_residual,
};
use mts_core::hsspace::{
    eigh, hs_inner, operator_norm, orthonormalize, range_projection, sqrt_spectral, sqrt_sznagy,
    subspace_intersection, svd, trace_norm,
};
use mts_core::margstates::{
    basis_offdiag, basis_v, check_marginal, cond_exp_p, cond_exp_q, p_plus_q, proj_ci_plus_v,
    proj_offdiag, proj_v, sample_mts, SampleMethod, StateElement,
};
use mts_core::random::{
    haar_unitary, random_hermitian, random_matrix, random_psd, random_unit_vector,
};
use mts_core::schmidt::{
    apply_local, coefficient_matrix, pure_mts_from_unitary, schmidt_decompose, vec_distance,
};
use mts_core::{Matrix, Tolerances, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sampled(seed: u64, n: usize) -> StateElement {
    let method = if seed.is_multiple_of(2) {
        SampleMethod::Mixture
    } else {
        SampleMethod::ProjectShrink
    };
    sample_mts(n, seed, method).unwrap()
}

fn local(a: &Matrix, n: usize, left: bool) -> Matrix {
    if left {
        a.kron(&Matrix::identity(n))
    } else {
        Matrix::identity(n).kron(a)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hs_inner_is_positive_definite(seed in any::<u64>(), m in 1usize..10) {
        let a = random_matrix(&mut rng(seed), m, m);
        let ip = hs_inner(&a, &a).unwrap();
        prop_assert!(ip.re > 0.0 && ip.im.abs() < 1e-14 * ip.re);
        let z = Matrix::zeros(m, m);
        prop_assert_eq!(hs_inner(&z, &z).unwrap().norm(), 0.0);
    }

    #[test]
    fn trace_norm_is_a_norm(seed in any::<u64>(), m in 1usize..10, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, m, m);
        let b = random_matrix(&mut r, m, m);
        let (ta, tb) = (trace_norm(&a), trace_norm(&b));
        prop_assert!(trace_norm(&(&a + &b)) <= ta + tb + 1e-12);
        let z = C64::new(re, im);
        prop_assert!((trace_norm(&a.scale(z)) - z.norm() * ta).abs() <= 1e-12 * (1.0 + z.norm() * ta));
    }

    #[test]
    fn eigh_reconstructs(seed in any::<u64>(), m in 1usize..12) {
        let a = random_hermitian(&mut rng(seed), m);
        let e = eigh(&a).unwrap();
        let u = &e.vectors;
        let lam = Matrix::diag(&e.values);
        let residual = (&a.matmul(u) - &u.matmul(&lam)).hs_norm();
        prop_assert!(residual <= 1e-11 * a.hs_norm());
        let unitary = (&u.adjoint_mul(u) - &Matrix::identity(m)).hs_norm();
        prop_assert!(unitary <= 1e-11);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn range_projection_invariants(seed in any::<u64>(), m in 2usize..10, k in 1usize..10) {
        let mut r = rng(seed);
        let k = k.min(m);
        let g = random_matrix(&mut r, m, k);
        let h = g.matmul(&g.adjoint()).hermitian_part();
        let rank_tol = 1e-9;
        let rp = range_projection(&h, rank_tol).unwrap();
        let p = &rp.projection;
        prop_assert_eq!(rp.rank, k);
        prop_assert!((&(p * p) - p).hs_norm() < 1e-12);
        prop_assert!((p - &p.adjoint()).hs_norm() < 1e-12);
        let lmax = rp.eigen.max();
        prop_assert!((&(p * &h) - &h).hs_norm() <= 2.0 * rank_tol * lmax * m as f64);
    }

    #[test]
    fn intersection_with_self_and_complement(seed in any::<u64>(), m in 2usize..5, k in 1usize..6) {
        let mut r = rng(seed);
        let k = k.min(m * m - 1);
        let vs: Vec<Matrix> = (0..k).map(|_| random_matrix(&mut r, m, m)).collect();
        let a = orthonormalize(&vs).unwrap();
        prop_assert_eq!(subspace_intersection(&a, &a, 1e-9).unwrap().len(), a.len());
        let mut comp = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let e = Matrix::unit(m, i, j);
                comp.push(&e - &a.project(&e));
            }
        }
        let c = orthonormalize(&comp).unwrap();
        prop_assert_eq!(c.len(), m * m - a.len());
        prop_assert_eq!(subspace_intersection(&a, &c, 1e-9).unwrap().len(), 0);
    }

    #[test]
    fn sqrt_iteration_agrees(seed in any::<u64>(), m in prop::sample::select(vec![4usize, 9, 16])) {
        let c = random_psd(&mut rng(seed), m, 0.1);
        let s = sqrt_spectral(&c).unwrap();
        let z = sqrt_sznagy(&c, 100_000, 1e-12).unwrap();
        prop_assert!((&s - &z).hs_norm() <= 1e-8 * s.hs_norm().max(1.0));
    }

    #[test]
    fn conditional_expectation_properties(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let m = n * n;
        let x = random_matrix(&mut r, m, m);
        let a = local(&random_matrix(&mut r, n, n), n, true);
        let b = local(&random_matrix(&mut r, n, n), n, true);
        let c = local(&random_matrix(&mut r, n, n), n, false);
        let d = local(&random_matrix(&mut r, n, n), n, false);
        let p = |y: &Matrix| cond_exp_p(y, n).unwrap();
        let q = |y: &Matrix| cond_exp_q(y, n).unwrap();
        let tol = 1e-12 * (1.0 + x.hs_norm()) * 10.0;
        // (i)
        let h = random_psd(&mut r, m, 0.0);
        prop_assert!(eigh(&p(&h)).unwrap().min() >= -1e-12 * eigh(&h).unwrap().max());
        prop_assert!(eigh(&q(&h)).unwrap().min() >= -1e-12 * eigh(&h).unwrap().max());
        prop_assert!((&p(&Matrix::identity(m)) - &Matrix::identity(m)).hs_norm() < 1e-14);
        // (ii)
        let axb = &(&a * &x) * &b;
        prop_assert!((&p(&axb) - &(&(&a * &p(&x)) * &b)).hs_norm() <= tol * a.hs_norm() * b.hs_norm());
        let cxd = &(&c * &x) * &d;
        prop_assert!((&q(&cxd) - &(&(&c * &q(&x)) * &d)).hs_norm() <= tol * c.hs_norm() * d.hs_norm());
        // (iii)
        prop_assert!((&p(&(&x * &c)) - &p(&(&c * &x))).hs_norm() <= tol * c.hs_norm());
        prop_assert!((&q(&(&x * &a)) - &q(&(&a * &x))).hs_norm() <= tol * a.hs_norm());
        // (iv)
        let xx = x.adjoint_mul(&x);
        prop_assert!(p(&xx).hs_norm() > 0.0 && q(&xx).hs_norm() > 0.0);
        let z = Matrix::zeros(m, m);
        prop_assert_eq!(p(&z.adjoint_mul(&z)).hs_norm(), 0.0);
        // (v)
        prop_assert!((p(&x).tau() - x.tau()).norm() <= tol);
        prop_assert!((q(&x).tau() - x.tau()).norm() <= tol);
        // (vi)
        prop_assert!((&p(&x.adjoint()) - &p(&x).adjoint()).hs_norm() <= tol);
        prop_assert!((&q(&x.adjoint()) - &q(&x).adjoint()).hs_norm() <= tol);
        // (vii)
        let on = operator_norm(&x);
        prop_assert!(operator_norm(&p(&x)) <= on * (1.0 + 1e-12));
        prop_assert!(operator_norm(&q(&x)) <= on * (1.0 + 1e-12));
        // Trace-norm contraction.
        let tn = trace_norm(&x);
        prop_assert!(trace_norm(&p(&x)) <= tn + 1e-12);
        prop_assert!(trace_norm(&q(&x)) <= tn + 1e-12);
    }

    #[test]
    fn offdiag_projection_is_orthogonal(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let m = n * n;
        let x = random_matrix(&mut r, m, m);
        let y = random_matrix(&mut r, m, m);
        let e = |z: &Matrix| proj_offdiag(z, n).unwrap();
        let ex = e(&x);
        prop_assert!((&e(&ex) - &ex).hs_norm() < 1e-12 * (1.0 + x.hs_norm()));
        let lhs = hs_inner(&ex, &y).unwrap();
        let rhs = hs_inner(&x, &e(&y)).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + x.hs_norm() * y.hs_norm()));
        prop_assert!(ex.tau().norm() < 1e-13 * (1.0 + x.hs_norm()));
        let v = basis_v(n);
        prop_assert!(v.vectors().iter().all(|b| hs_inner(&ex, b).unwrap().norm() < 1e-12 * (1.0 + x.hs_norm())));
        // Elements of V are annihilated by both expectations.
        let pv = proj_v(&x, n).unwrap();
        prop_assert!(cond_exp_p(&pv, n).unwrap().hs_norm() < 1e-12 * (1.0 + x.hs_norm()));
        prop_assert!(cond_exp_q(&pv, n).unwrap().hs_norm() < 1e-12 * (1.0 + x.hs_norm()));
    }

    #[test]
    fn sampled_states_are_identity_minus_v(seed in any::<u64>(), n in 2usize..4) {
        let h = sampled(seed, n);
        let m = n * n;
        let v = &Matrix::identity(m) - h.matrix();
        prop_assert!((&v - &proj_v(&v, n).unwrap()).hs_norm() < 1e-10);
        prop_assert!(check_marginal(&h, 1e-10).is_marginal_tracial);
    }

    #[test]
    fn identity_minus_small_v_is_marginal(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let m = n * n;
        let v = proj_v(&random_hermitian(&mut r, m), n).unwrap().hermitian_part();
        let scale = 0.9 / operator_norm(&v);
        let h = &Matrix::identity(m) - &v.scale_real(scale);
        let state = StateElement::new(n, h, 1e-9).unwrap();
        prop_assert!(check_marginal(&state, 1e-12).is_marginal_tracial);
    }

    #[test]
    fn witnesses_are_sound(seed in any::<u64>(), n in 2usize..4) {
        let tols = Tolerances::default();
        let h = sampled(seed, n);
        let t = test_extremal_t23(&h, &tols).unwrap();
        let rp = range_projection(h.matrix(), tols.rank_tol).unwrap();
        if let Some(v) = t.witness {
            prop_assert!(v.hermitian_residual() < 1e-8);
            prop_assert!((v.hs_norm() - 1.0).abs() < 1e-8);
            prop_assert!(witness_residual(&v, &rp.projection, n).unwrap() < 1e-8);
            // h ± t v stays PSD and marginal for a small enough t.
            let mut step = 1.0;
            let ok = loop {
                let plus = h.matrix() + &v.scale_real(step);
                let minus = h.matrix() - &v.scale_real(step);
                let good = [plus, minus].into_iter().all(|x| {
                    let e = eigh(&x).unwrap();
                    e.min() >= -1e-12 * e.max()
                        && StateElement::new(n, x, 1e-9)
                            .map(|s| check_marginal(&s, 1e-9).is_marginal_tracial)
                            .unwrap_or(false)
                });
                if good {
                    break true;
                }
                step /= 2.0;
                if step < 1e-12 {
                    break false;
                }
            };
            prop_assert!(ok);
        }
        if t.rank < n * n {
            let a = test_extremal_a2(&h, &tols).unwrap();
            prop_assert_eq!(a.extremal, t.extremal);
            if let Some(w) = a.witness {
                prop_assert!(witness_residual(&w, &rp.projection, n).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn pure_states_satisfy_projection_identity(seed in any::<u64>(), n in 2usize..5) {
        let (_, h) = pure_mts_from_unitary(&haar_unitary(&mut rng(seed), n)).unwrap();
        let rp = range_projection(h.matrix(), 1e-9).unwrap();
        prop_assert_eq!(rp.rank, 1);
        prop_assert_eq!(compressed_marginal_span_dim(&rp.projection, n).unwrap(), 1);
        for b in compression_basis(&rp.projection, 1).unwrap().vectors() {
            let mut a = b.clone();
            a.axpy(-b.tau(), h.matrix());
            prop_assert!((&a - &proj_offdiag(&a, n).unwrap()).hs_norm() < 1e-8);
        }
    }

    #[test]
    fn schmidt_invariants(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let xi = random_unit_vector(&mut r, n * n);
        let d = schmidt_decompose(&xi, 1e-10).unwrap();
        prop_assert!(vec_distance(&d.reconstruct(), &xi) < 1e-10);
        let u = haar_unitary(&mut r, n);
        let w = haar_unitary(&mut r, n);
        let d2 = schmidt_decompose(&apply_local(&u, &w, &xi), 1e-10).unwrap();
        for (a, b) in d.coefficients.iter().zip(&d2.coefficients) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let x = coefficient_matrix(&xi).unwrap();
        let s = svd(&x).singular_values;
        prop_assert_eq!(d.schmidt_rank, s.iter().filter(|&&v| v > 1e-10).count());
    }

    #[test]
    fn pure_mts_has_flat_schmidt_spectrum(seed in any::<u64>(), n in 2usize..5) {
        let (xi, h) = pure_mts_from_unitary(&haar_unitary(&mut rng(seed), n)).unwrap();
        prop_assert!(check_marginal(&h, 1e-10).is_marginal_tracial);
        let d = schmidt_decompose(&xi, 1e-10).unwrap();
        let want = 1.0 / (n as f64).sqrt();
        prop_assert!(d.coefficients.iter().all(|c| (c - want).abs() < 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn descent_invariants(seed in any::<u64>(), n in 2usize..4) {
        let tols = Tolerances::default();
        let h = sampled(seed, n);
        let initial = range_projection(h.matrix(), tols.rank_tol).unwrap().rank;
        let t = descend(&h, &tols, n * n).unwrap();
        prop_assert!(t.is_success());
        prop_assert!(t.steps.len() <= initial);
        let mut prev = initial;
        for s in &t.steps {
            prop_assert_eq!(s.rank_before, prev);
            prop_assert!(s.rank_after < s.rank_before);
            prop_assert!(s.marginal_residual < 1e-9);
            prop_assert!(s.min_eigenvalue_ratio >= -1e-10);
            prev = s.rank_after;
        }
        let c = &t.terminal_certificate;
        prop_assert!(c.rank < n * n && c.rank * c.rank < 2 * n * n);
        prop_assert!((t.terminal.matrix().tau() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(c.is_consistent(), "{:?}", c.inconsistencies);
        let rp = range_projection(t.terminal.matrix(), tols.rank_tol).unwrap();
        prop_assert_eq!(compressed_marginal_span_dim(&rp.projection, n).unwrap(), rp.rank * rp.rank);
    }
}

#[test]
fn orthogonal_decomposition_has_n4_elements() {
    for n in 2..=4 {
        let m = n * n;
        let mut all = vec![Matrix::identity(m)];
        all.extend(basis_offdiag(n).into_vectors());
        all.extend(basis_v(n).into_vectors());
        assert_eq!(all.len(), n.pow(4));
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let g = hs_inner(a, b).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        // (P-Q)^2 and I-(P-Q)^2 split every element.
        let x = Matrix::unit(m, 0, m - 1);
        let split = &proj_offdiag(&x, n).unwrap() + &proj_ci_plus_v(&x, n).unwrap();
        assert!((&split - &x).hs_norm() < 1e-14);
        assert!(p_plus_q(&basis_v(n).vectors()[0], n).unwrap().hs_norm() < 1e-14);
    }
}
