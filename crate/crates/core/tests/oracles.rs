//! Library results checked against small independent implementations.

use mts_core::extremality::{compression_basis, test_extremal_a2, test_extremal_t23};
use mts_core::hsspace::{eigh, range_projection, svd, trace_norm};
use mts_core::margstates::{
    basis_v, cond_exp_p, cond_exp_q, mix, sample_mts, state_tau, SampleMethod, StateElement,
};
use mts_core::random::{haar_unitary, random_matrix, random_psd, random_weights};
use mts_core::schmidt::pure_mts_from_unitary;
use mts_core::{Matrix, Tolerances, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One-sided (Hestenes) Jacobi: rotate column pairs until mutually orthogonal.
fn jacobi_singular_values(a: &Matrix) -> Vec<f64> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut c: Vec<Vec<C64>> = (0..cols).map(|j| a.column(j)).collect();
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha: f64 = c[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = c[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = c[p].iter().zip(&c[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..rows {
                    let x = c[p][i];
                    let y = c[q][i] * phase.conj();
                    c[p][i] = x * cs - y * sn;
                    c[q][i] = (x * sn + y * cs) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = c
        .iter()
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Rank of a set of flattened vectors by Gaussian elimination with complete pivoting.
fn rank_oracle(vs: &[Matrix], rel_tol: f64) -> usize {
    let mut rows: Vec<Vec<C64>> = vs.iter().map(|v| v.as_slice().to_vec()).collect();
    if rows.is_empty() {
        return 0;
    }
    let width = rows[0].len();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    let mut rank = 0;
    let mut free_cols: Vec<usize> = (0..width).collect();
    while rank < rows.len() {
        let mut best = (0.0, 0, 0);
        for (i, row) in rows.iter().enumerate().skip(rank) {
            for (ci, &j) in free_cols.iter().enumerate() {
                if row[j].norm() > best.0 {
                    best = (row[j].norm(), i, ci);
                }
            }
        }
        if best.0 <= rel_tol * scale {
            break;
        }
        rows.swap(rank, best.1);
        let col = free_cols.remove(best.2);
        let pivot = rows[rank][col];
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            let f = row[col] / pivot;
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
        }
        rank += 1;
    }
    rank
}

fn intersection_dim_oracle(a: &[Matrix], b: &[Matrix]) -> usize {
    let mut all = a.to_vec();
    all.extend_from_slice(b);
    rank_oracle(a, 1e-9) + rank_oracle(b, 1e-9) - rank_oracle(&all, 1e-9)
}

fn random_state(seed: u64, n: usize) -> StateElement {
    let method = if seed.is_multiple_of(2) {
        SampleMethod::Mixture
    } else {
        SampleMethod::ProjectShrink
    };
    sample_mts(n, seed, method).unwrap()
}

/// Mixture of `k` Haar pure marginal tracial states, typically of rank `k`.
fn low_rank_mixture(seed: u64, n: usize, k: usize) -> StateElement {
    let mut r = rng(seed);
    let states: Vec<StateElement> = (0..k)
        .map(|_| pure_mts_from_unitary(&haar_unitary(&mut r, n)).unwrap().1)
        .collect();
    mix(&states, &random_weights(&mut r, k)).unwrap()
}

#[test]
fn trace_norm_matches_hestenes_jacobi() {
    let mut r = rng(1);
    for m in [2, 4, 9, 16] {
        for _ in 0..10 {
            let a = random_matrix(&mut r, m, m);
            let expected: f64 = jacobi_singular_values(&a).iter().sum::<f64>() / m as f64;
            assert!((trace_norm(&a) - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }
}

#[test]
fn svd_values_match_hestenes_jacobi() {
    let mut r = rng(2);
    for (rows, cols) in [(3, 5), (6, 2), (9, 9)] {
        let a = random_matrix(&mut r, rows, cols);
        let got = svd(&a).singular_values;
        let want = jacobi_singular_values(&a);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12 * want[0]);
        }
    }
}

#[test]
fn psd_eigenvalues_are_singular_values() {
    let mut r = rng(3);
    for m in [4, 9] {
        let h = random_psd(&mut r, m, 0.0);
        let e = eigh(&h).unwrap();
        for (x, s) in e.values.iter().zip(jacobi_singular_values(&h)) {
            assert!((x - s).abs() < 1e-12 * e.max());
        }
    }
}

#[test]
fn conditional_expectation_on_product_elements() {
    let mut r = rng(4);
    for n in [2, 3] {
        let mut x = Matrix::zeros(n * n, n * n);
        let mut p_expected = Matrix::zeros(n * n, n * n);
        let mut q_expected = Matrix::zeros(n * n, n * n);
        for _ in 0..3 {
            let a = random_matrix(&mut r, n, n);
            let b = random_matrix(&mut r, n, n);
            x = &x + &a.kron(&b);
            p_expected = &p_expected + &a.kron(&Matrix::identity(n)).scale(b.tau());
            q_expected = &q_expected + &Matrix::identity(n).kron(&b).scale(a.tau());
        }
        assert!((&cond_exp_p(&x, n).unwrap() - &p_expected).hs_norm() < 1e-13);
        assert!((&cond_exp_q(&x, n).unwrap() - &q_expected).hs_norm() < 1e-13);
    }
}

#[test]
fn intersection_dims_match_rank_oracle() {
    let tols = Tolerances::default();
    for n in [2, 3] {
        for k in 1..=n {
            for seed in 0..3 {
                let h = low_rank_mixture(100 * n as u64 + 10 * k as u64 + seed, n, k);
                let rp = range_projection(h.matrix(), tols.rank_tol).unwrap();
                let comp = compression_basis(&rp.projection, rp.rank).unwrap();
                let want = intersection_dim_oracle(comp.vectors(), basis_v(n).vectors());
                let t = test_extremal_t23(&h, &tols).unwrap();
                assert_eq!(t.intersection_dim, want, "n={n} k={k} seed={seed}");
            }
        }
    }
}

#[test]
fn tau_intersection_is_all_of_v() {
    let tols = Tolerances::default();
    for n in [2, 3] {
        let t = test_extremal_t23(&state_tau(n).unwrap(), &tols).unwrap();
        let ident: Vec<Matrix> = (0..n * n)
            .flat_map(|i| (0..n * n).map(move |j| Matrix::unit(n * n, i, j)))
            .collect();
        assert_eq!(
            t.intersection_dim,
            intersection_dim_oracle(&ident, basis_v(n).vectors())
        );
        assert_eq!(t.intersection_dim, (n * n - 1) * (n * n - 1));
    }
}

#[test]
fn bell_mixture_brute_force() {
    // Range of (Φ⁺ + Φ⁻)/2 is span{e₀⊗e₀, e₁⊗e₁}; compression spanned by the four matrix units.
    let idx = [0usize, 3];
    let comp: Vec<Matrix> = idx
        .iter()
        .flat_map(|&i| idx.iter().map(move |&j| Matrix::unit(4, i, j)))
        .collect();
    let paulis = [
        Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap(),
        Matrix::from_vec(
            2,
            2,
            vec![
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap(),
        Matrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap(),
    ];
    let v: Vec<Matrix> = paulis
        .iter()
        .flat_map(|a| paulis.iter().map(move |b| a.kron(b)))
        .collect();
    let want = intersection_dim_oracle(&comp, &v);
    assert_eq!(want, 2);

    let bell = |s: f64| pure_mts_from_unitary(&Matrix::diag(&[1.0, s])).unwrap().1;
    let h = mix(&[bell(1.0), bell(-1.0)], &[0.5, 0.5]).unwrap();
    let tols = Tolerances::default();
    let t = test_extremal_t23(&h, &tols).unwrap();
    assert_eq!(t.intersection_dim, want);
    let w = t.witness.unwrap();
    let mut with_w = v.clone();
    with_w.push(w.clone());
    assert_eq!(rank_oracle(&with_w, 1e-9), 9, "witness lies in V");
    let mut with_w = comp.clone();
    with_w.push(w);
    assert_eq!(
        rank_oracle(&with_w, 1e-9),
        4,
        "witness lies in the compression"
    );
}

#[test]
fn block_kernel_matches_intersection() {
    // The intersection is closed under adjoints, so its Hermitian part has
    // real dimension equal to its complex dimension.
    let tols = Tolerances::default();
    for n in [2, 3] {
        for seed in 0..6 {
            let h = random_state(seed, n);
            let t = test_extremal_t23(&h, &tols).unwrap();
            if t.rank == n * n {
                continue;
            }
            let a = test_extremal_a2(&h, &tols).unwrap();
            assert_eq!(a.kernel_dim, t.intersection_dim);
        }
        for k in 1..=n {
            let h = low_rank_mixture(7 + k as u64, n, k);
            let t = test_extremal_t23(&h, &tols).unwrap();
            let a = test_extremal_a2(&h, &tols).unwrap();
            assert_eq!(a.kernel_dim, t.intersection_dim, "n={n} k={k}");
        }
    }
}

#[test]
fn pure_state_marginals_by_direct_sum() {
    let mut r = rng(5);
    for n in [2, 3, 4] {
        let (xi, h) = pure_mts_from_unitary(&haar_unitary(&mut r, n)).unwrap();
        // Tr₂|ξ⟩⟨ξ| computed entrywise from the vector.
        for i in 0..n {
            for j in 0..n {
                let s: C64 = (0..n).map(|k| xi[i * n + k] * xi[j * n + k].conj()).sum();
                let want = if i == j { 1.0 / n as f64 } else { 0.0 };
                assert!((s - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!((h.matrix().tau() - C64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
