mod common;

use common::{gram, random_psd, rayleigh, rng, sparse_pca_optimum, submatrix, subsets};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sparse_apca::linalg::{frobenius_norm, symmetric_eigen};
use sparse_apca::{
    deflate, generalized_truncated_power, sparse_eigen_sequence, truncated_power, DeflationState, SolverSettings,
};

fn psd_from_seed(dim: usize, seed: u64) -> Array2<f64> {
    random_psd(dim, &mut rng(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rayleigh_quotient_never_decreases(dim in 3usize..14, k_frac in 0.1f64..1.0, seed in any::<u64>()) {
        let s = psd_from_seed(dim, seed);
        let k = ((dim as f64 * k_frac).ceil() as usize).clamp(1, dim);
        let out = truncated_power(&gram(s), k, &SolverSettings::default(), None).unwrap();
        for w in out.objective_path.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10, "path dropped from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn output_has_at_most_s_nonzeros(dim in 2usize..20, k in 1usize..20, seed in any::<u64>()) {
        let k = k.min(dim);
        let s = psd_from_seed(dim, seed);
        let out = truncated_power(&gram(s), k, &SolverSettings::default(), None).unwrap();
        let nnz = out.vector.values().iter().filter(|v| **v != 0.0).count();
        prop_assert!(nnz <= k);
        prop_assert_eq!(nnz, out.vector.support().len());
        prop_assert!((out.vector.norm() - 1.0).abs() < 1e-12);
        let lead = out.vector.values().iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        prop_assert!(lead > 0.0);
    }

    #[test]
    fn argmax_is_scale_equivariant(dim in 3usize..12, k in 1usize..12, c in 1e-3f64..1e3, seed in any::<u64>()) {
        let k = k.min(dim);
        let s = psd_from_seed(dim, seed);
        let settings = SolverSettings::default();
        let a = truncated_power(&gram(s.clone()), k, &settings, None).unwrap();
        let b = truncated_power(&gram(s * c), k, &settings, None).unwrap();
        prop_assert_eq!(a.vector.support(), b.vector.support());
        for (x, y) in a.vector.values().iter().zip(b.vector.values()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn every_deflation_stage_keeps_projection_algebra(dim in 4usize..12, r in 1usize..4, seed in any::<u64>()) {
        let s = psd_from_seed(dim, seed);
        let k = (dim / 2).max(1);
        let seq = sparse_eigen_sequence(&gram(s.clone()), &vec![k; r], &SolverSettings::default()).unwrap();
        // Replay the deflations so every intermediate B is inspected.
        let mut state = DeflationState::new(s.view()).unwrap();
        for out in &seq.outcomes {
            let v = out.vector.values().to_owned();
            let quad = v.dot(&state.b_matrix().dot(&v));
            state = deflate(&state, (&v / quad.sqrt()).view()).unwrap();
            let (idem, sym) = state.b_defects();
            prop_assert!(idem <= 1e-8 && sym <= 1e-8, "defects {idem:e} {sym:e}");
        }
        let norm = frobenius_norm(s.view());
        let last = seq.final_state.as_ref().unwrap();
        for q in last.q_vectors() {
            prop_assert!(q.dot(&last.deflated_gram().dot(q)).abs() <= 1e-8 * norm);
        }
    }
}

#[test]
fn matches_exhaustive_optimum_on_tiny_instances() {
    let settings = SolverSettings::default();
    let mut rng = rng(2024);
    let (mut hits, mut total) = (0, 0);
    let mut worst = 1.0f64;
    for case in 0..150 {
        let dim = 4 + case % 5;
        let k = 1 + case % 3;
        let s = random_psd(dim, &mut rng);
        let opt = sparse_pca_optimum(s.view(), k);
        let out = truncated_power(&gram(s.clone()), k, &settings, None).unwrap();
        let got = rayleigh(s.view(), &out.vector.values().to_owned());
        let ratio = got / opt;
        worst = worst.min(ratio);
        total += 1;
        if ratio >= 1.0 - 1e-6 {
            hits += 1;
        }
    }
    let rate = hits as f64 / total as f64;
    eprintln!("exhaustive oracle: {hits}/{total} within 1e-6, worst ratio {worst:.6}");
    assert!(rate >= 0.95, "only {hits}/{total} instances reached the optimum");
}

#[test]
fn six_by_six_two_sparse_matches_enumeration() {
    let settings = SolverSettings { epsilon: 1e-12, max_iterations: 10_000, ..SolverSettings::default() };
    let mut rng = rng(6);
    let mut checked = 0;
    for _ in 0..20 {
        let s = random_psd(6, &mut rng);
        let opt = sparse_pca_optimum(s.view(), 2);
        let out = truncated_power(&gram(s.clone()), 2, &settings, None).unwrap();
        let got = rayleigh(s.view(), &out.vector.values().to_owned());
        if (got - opt).abs() <= 1e-8 * opt.max(1.0) {
            checked += 1;
        }
    }
    assert!(checked >= 19, "{checked}/20 matched the enumeration optimum");
}

#[test]
fn dense_sparsity_gives_leading_eigenvector() {
    let settings = SolverSettings { epsilon: 1e-12, max_iterations: 20_000, ..SolverSettings::default() };
    let mut rng = rng(8);
    for dim in [3, 5, 9] {
        let s = random_psd(dim, &mut rng);
        let out = truncated_power(&gram(s.clone()), dim, &settings, None).unwrap();
        let (_, vecs) = symmetric_eigen(s.view());
        let lead = vecs.column(0);
        let cos = out.vector.values().dot(&lead).abs();
        assert!(1.0 - cos < 1e-10, "dim {dim}: cos {cos}");
    }
}

#[test]
fn generalized_iteration_with_identity_is_truncated_power() {
    let settings = SolverSettings { epsilon: 1e-12, max_iterations: 10_000, ..SolverSettings::default() };
    let mut rng = rng(9);
    for _ in 0..10 {
        let s = random_psd(7, &mut rng);
        let a = truncated_power(&gram(s.clone()), 3, &settings, None).unwrap();
        let b = generalized_truncated_power(s.view(), Array2::eye(7).view(), 3, &settings).unwrap();
        let vb = b.vector.normalized();
        assert_eq!(a.vector.support(), vb.support());
        for (x, y) in a.vector.values().iter().zip(vb.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

/// `max v'S̃v` over `v'Bv = 1`, `|v|_0 <= k`, by enumerating supports and
/// solving each restricted generalized eigenproblem through `B_JJ^{-1/2}`.
fn deflated_optimum(s_tilde: &Array2<f64>, b: &Array2<f64>, k: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for j in subsets(s_tilde.nrows(), k) {
        let bj = submatrix(b.view(), &j);
        let (d, u) = symmetric_eigen(bj.view());
        if d[d.len() - 1] < 1e-9 {
            continue;
        }
        let w = u.dot(&Array2::from_diag(&d.mapv(|x| 1.0 / x.sqrt()))).dot(&u.t());
        let a = w.dot(&submatrix(s_tilde.view(), &j)).dot(&w);
        best = best.max(symmetric_eigen(a.view()).0[0]);
    }
    best
}

#[test]
fn second_vector_attains_deflated_optimum_with_planted_structure() {
    let mut rng = rng(88);
    for case in 0..10 {
        let mut u1 = Array1::<f64>::zeros(8);
        let mut u2 = Array1::<f64>::zeros(8);
        for (&i, v) in [0usize, 2, 5].iter().zip([0.6, -0.5, 0.62]) {
            u1[i] = v;
        }
        for (&i, v) in [1usize, 4, 7].iter().zip([0.7, 0.45, -0.55]) {
            u2[i] = v;
        }
        u1 /= u1.dot(&u1).sqrt();
        u2 /= u2.dot(&u2).sqrt();
        let outer = |u: &Array1<f64>| {
            let c = u.view().insert_axis(ndarray::Axis(1));
            c.dot(&c.t())
        };
        let s = outer(&u1) * 5.0 + outer(&u2) * 3.0 + random_psd(8, &mut rng) * 0.02;

        let seq = sparse_eigen_sequence(&gram(s.clone()), &[3, 3], &SolverSettings::default()).unwrap();
        let v1 = seq.vectors[0].values().to_owned();
        let b = Array2::<f64>::eye(8) - outer(&v1);
        let s_tilde = b.dot(&s).dot(&b);
        let opt = deflated_optimum(&s_tilde, &b, 3);

        let x = seq.outcomes[1].vector.values().to_owned();
        let got = x.dot(&s_tilde.dot(&x)) / x.dot(&b.dot(&x));
        assert!((got - opt).abs() <= 1e-6 * opt, "case {case}: attained {got}, optimum {opt}");
        assert_eq!(seq.vectors[1].support(), &[1, 4, 7]);
    }
}

#[test]
fn deflating_an_exact_eigenvector_drops_rank() {
    let mut rng = rng(10);
    let s = random_psd(6, &mut rng);
    let (vals, vecs) = symmetric_eigen(s.view());
    let state = deflate(&DeflationState::new(s.view()).unwrap(), vecs.column(0)).unwrap();
    let after = sparse_apca::linalg::symmetric_eigenvalues(state.deflated_gram());
    assert!(after.iter().filter(|v| v.abs() < 1e-10 * vals[0]).count() >= 1);
    for (a, b) in after.iter().zip(vals.iter().skip(1)) {
        assert!((a - b).abs() < 1e-9 * vals[0]);
    }
}

#[test]
fn out_of_range_sparsity_is_rejected() {
    let s = gram(Array2::eye(4));
    assert!(truncated_power(&s, 0, &SolverSettings::default(), None).is_err());
    assert!(truncated_power(&s, 5, &SolverSettings::default(), None).is_err());
    assert!(sparse_eigen_sequence(&s, &[], &SolverSettings::default()).is_err());
}
