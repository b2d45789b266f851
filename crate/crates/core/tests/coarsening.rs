mod common;

use common::*;
use lars_amg::coarsening::{
    build_p, fit_all, independent_set, kernel_weight, lar_coarsening, maxvol_correction,
    strength_graph, CoarseningParams, Interpolation, KernelKind, KernelSpec, VariableFit,
};
use lars_amg::fem::{assemble, disc_mesh, disc_mesh_with_sectors, DiffusionCoefficients};
use lars_amg::smoother::{generate_test_vectors, SmootherSpec, TestVectorSet};
use lars_amg::CsrMatrix;
use proptest::prelude::*;

fn disc(levels: usize) -> CsrMatrix {
    assemble(&disc_mesh(levels), &DiffusionCoefficients::ISOTROPIC)
        .unwrap()
        .0
}

fn path_laplacian(n: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

fn vectors(a: &CsrMatrix, k: usize, seed: u64) -> TestVectorSet {
    generate_test_vectors(a, k, 4, &SmootherSpec::gauss_seidel(), seed).unwrap()
}

#[test]
fn kernel_values() {
    let tri = KernelSpec {
        kind: KernelKind::TriCube,
        radius: 4,
    };
    assert_eq!(kernel_weight(&tri, 0), 1.0);
    assert!((kernel_weight(&tri, 2) - (1.0f64 - 0.125).powi(3)).abs() < 1e-15);
    assert_eq!(kernel_weight(&tri, 4), 0.0);
    let w: Vec<f64> = (0..5).map(|d| kernel_weight(&tri, d)).collect();
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
    let nn = KernelSpec {
        kind: KernelKind::NearestNeighbor,
        radius: 2,
    };
    assert_eq!(
        (0..3).map(|d| kernel_weight(&nn, d)).collect::<Vec<_>>(),
        vec![1.0, 1.0, 0.0]
    );
}

// Unpenalized weights are the least squares fit of the centre's values on the
// selected neighbors' values, independent of the column scaling.
#[test]
fn unpenalized_weights_match_subset_least_squares() {
    let a = disc(3);
    let v = vectors(&a, 10, 3);
    let fits = fit_all(&a, &v, &CoarseningParams::default(), None).unwrap();
    let mut checked = 0;
    for (i, f) in fits.iter().enumerate() {
        let VariableFit::Fitted(fit) = f else {
            continue;
        };
        let cols: Vec<Vec<f64>> = fit
            .selected
            .iter()
            .map(|&j| v.vectors.iter().map(|x| x[j]).collect())
            .collect();
        let target: Vec<f64> = v.vectors.iter().map(|x| x[i]).collect();
        let w = lars_amg::dense::DenseMatrix::from_columns(&cols).unwrap();
        let oracle = normal_equations_lsq(&w, &target);
        for (p, q) in fit.p_unpenalized.iter().zip(&oracle) {
            assert!(
                (p - q).abs() < 1e-8 * (1.0 + q.abs()),
                "row {i}: {p} vs {q}"
            );
        }
        checked += 1;
    }
    assert_eq!(checked, a.nrows());
}

// On a path every interior fit with two nearest neighbors must use both of
// them, and affine data make the weights exactly one half.
#[test]
fn path_graph_interpolates_from_both_neighbors() {
    let n = 9;
    let a = path_laplacian(n);
    let set = TestVectorSet::new(vec![
        (0..n).map(|i| 1.0 + 0.0 * i as f64).collect(),
        (0..n).map(|i| i as f64).collect(),
    ]);
    let mut params = CoarseningParams {
        kernel: KernelSpec {
            kind: KernelKind::NearestNeighbor,
            radius: 2,
        },
        ..CoarseningParams::default()
    };
    params.lars.caliber = 2;
    params.lars.correlation_threshold = 0.0;
    let fits = fit_all(&a, &set, &params, None).unwrap();
    for i in 1..n - 1 {
        let f = fits[i].fit().unwrap();
        assert_eq!(f.selected, vec![i - 1, i + 1]);
        for p in &f.p_unpenalized {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn single_variable_is_coarse() {
    let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]).unwrap();
    let set = TestVectorSet::new(vec![vec![1.0], vec![-0.5]]);
    let (interp, rep) = lar_coarsening(&a, &set, &CoarseningParams::default()).unwrap();
    assert_eq!(interp.coarse, vec![0]);
    assert_eq!(rep.initial_fits[0], VariableFit::Isolated);
    assert_eq!(build_p(&interp).unwrap(), CsrMatrix::identity(1));
}

#[test]
fn coupled_pair_splits() {
    let a = CsrMatrix::from_triplets(
        2,
        2,
        &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
    )
    .unwrap();
    let set = TestVectorSet::new(vec![vec![1.0, 0.9], vec![0.5, 0.55], vec![-1.0, -1.1]]);
    let (interp, _) = lar_coarsening(&a, &set, &CoarseningParams::default()).unwrap();
    assert_eq!(interp.n_coarse(), 1);
    interp.validate().unwrap();
    let fine = (0..2).find(|&i| !interp.is_coarse(i)).unwrap();
    assert_eq!(interp.rows[fine].as_ref().unwrap().0, vec![1 - fine]);
}

#[test]
fn disc_coarsening_invariants() {
    for (sectors, levels) in [(6, 3), (5, 3), (6, 4)] {
        let a = assemble(
            &disc_mesh_with_sectors(sectors, levels),
            &DiffusionCoefficients::ISOTROPIC,
        )
        .unwrap()
        .0;
        let n = a.nrows();
        let v = vectors(&a, 12, 1);
        let params = CoarseningParams::default();
        let (interp, rep) = lar_coarsening(&a, &v, &params).unwrap();
        interp.validate().unwrap();
        assert!(interp.n_coarse() < n);
        assert!(rep.total_swaps() < n / 4, "swaps {}", rep.total_swaps());
        assert!(rep.outer_iterations <= params.maxvol_iterations.max(1));
        if rep.maxvol_converged {
            assert!(interp.max_weight() <= 1.0);
        }
        let p = build_p(&interp).unwrap();
        assert_eq!(p.nrows(), n);
        assert_eq!(p.ncols(), interp.n_coarse());
        for (k, &c) in interp.coarse.iter().enumerate() {
            assert_eq!(p.row(c), (&[k][..], &[1.0][..]));
        }
        let ptp = p.transpose().matmul(&p).unwrap();
        assert!(ptp.diagonal().iter().all(|&d| d >= 1.0));
        let caliber = interp.mean_caliber();
        assert!(caliber > 0.0 && caliber <= 2.0 * params.lars.caliber as f64);
        assert_eq!(rep.strength.sigma, rep.strength.recompute_sigma());
    }
}

#[test]
fn coarsening_is_deterministic() {
    let a = disc(3);
    let v = vectors(&a, 8, 5);
    let params = CoarseningParams::default();
    let (i1, r1) = lar_coarsening(&a, &v, &params).unwrap();
    let (i2, r2) = lar_coarsening(&a, &v, &params).unwrap();
    assert_eq!(i1, i2);
    assert_eq!(r1, r2);
}

#[test]
fn restricted_fits_use_mask_only() {
    let a = disc(3);
    let v = vectors(&a, 8, 2);
    let mask: Vec<bool> = (0..a.nrows()).map(|i| i % 3 == 0).collect();
    let fits = fit_all(&a, &v, &CoarseningParams::default(), Some(&mask)).unwrap();
    for (i, f) in fits.iter().enumerate() {
        if mask[i] {
            assert_eq!(*f, VariableFit::Coarse);
        } else if let VariableFit::Fitted(fit) = f {
            assert!(fit.selected.iter().all(|&j| mask[j]));
        }
    }
}

#[test]
fn independent_set_follows_importance_order() {
    let a = disc(3);
    let v = vectors(&a, 8, 4);
    let params = CoarseningParams::default();
    let fits = fit_all(&a, &v, &params, None).unwrap();
    let g = strength_graph(&fits, params.strength_threshold);
    let c = independent_set(&g, a.nrows());
    // picking order: σ descending, lowest index on ties
    let rank = |i: usize, j: usize| g.sigma[i] > g.sigma[j] || (g.sigma[i] == g.sigma[j] && i < j);
    for (i, row) in g.edges.iter().enumerate() {
        for &(j, w) in row {
            // a pick only discards unprocessed variables pointing into it
            if c[i] && c[j] {
                assert!(
                    rank(i, j),
                    "{i} -> {j}: later pick points into an earlier one"
                );
            }
            assert!(w > 0.0);
        }
        // every discarded variable has a strong edge into the coarse set
        if !c[i] {
            assert!(
                row.iter().any(|&(j, _)| c[j]),
                "variable {i} left without a coarse neighbor"
            );
        }
    }
    let all = strength_graph(&fits, 0.0);
    let total: usize = fits
        .iter()
        .filter_map(|f| f.fit())
        .map(|f| f.selected.len())
        .sum();
    assert_eq!(all.num_edges(), total);
}

fn path_interp(weight: f64) -> Interpolation {
    // coarse 0, 2, 4 on a path of 5; rows 1 and 3 interpolate from neighbors
    Interpolation {
        coarse: vec![0, 2, 4],
        coarse_index: vec![Some(0), None, Some(1), None, Some(2)],
        rows: vec![
            None,
            Some((vec![0, 2], vec![0.5, 0.5])),
            None,
            Some((vec![2, 4], vec![weight, 0.5])),
            None,
        ],
    }
}

#[test]
fn maxvol_leaves_bounded_weights_alone() {
    let a = path_laplacian(5);
    let set = TestVectorSet::new(vec![vec![1.0; 5], (0..5).map(|i| i as f64).collect()]);
    let interp = path_interp(0.5);
    let (out, rep) =
        maxvol_correction(&interp, &a, &set, &CoarseningParams::default(), 10).unwrap();
    assert_eq!(rep.swaps, 0);
    assert!(!rep.budget_exhausted);
    assert_eq!(out, interp);
}

#[test]
fn maxvol_swaps_a_large_weight() {
    let a = path_laplacian(5);
    let set = TestVectorSet::new(vec![vec![1.0; 5], (0..5).map(|i| i as f64).collect()]);
    let interp = path_interp(1.5);
    let (out, rep) =
        maxvol_correction(&interp, &a, &set, &CoarseningParams::default(), 10).unwrap();
    assert!(rep.swaps >= 1);
    assert!(out.is_coarse(3));
    out.validate().unwrap();
    if !rep.budget_exhausted {
        assert!(out.max_weight() <= 1.0);
    }
    let (_, none) = maxvol_correction(&interp, &a, &set, &CoarseningParams::default(), 0).unwrap();
    assert!(none.budget_exhausted);
}

#[test]
fn rejects_mismatched_vectors() {
    let a = disc(2);
    let set = TestVectorSet::new(vec![vec![1.0; 3]]);
    assert!(lar_coarsening(&a, &set, &CoarseningParams::default()).is_err());
    assert!(lar_coarsening(
        &a,
        &TestVectorSet::new(Vec::new()),
        &CoarseningParams::default()
    )
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coarsening_invariants_hold_for_any_seed(seed in any::<u64>(), k in 4usize..12, caliber in 1usize..5) {
        let a = disc(2);
        let v = vectors(&a, k, seed);
        let mut params = CoarseningParams::default();
        params.lars.caliber = caliber;
        let (interp, rep) = lar_coarsening(&a, &v, &params).unwrap();
        prop_assert!(interp.validate().is_ok());
        let cf: usize = (0..interp.n()).filter(|&i| interp.is_coarse(i)).count();
        prop_assert_eq!(cf, interp.n_coarse());
        prop_assert!(interp.coarse.windows(2).all(|w| w[0] < w[1]));
        if rep.maxvol_converged {
            prop_assert!(interp.max_weight() <= 1.0);
        }
        prop_assert_eq!(rep.strength.sigma.clone(), rep.strength.recompute_sigma());
    }

    #[test]
    fn zero_threshold_keeps_selection(seed in any::<u64>()) {
        let a = disc(2);
        let v = vectors(&a, 8, seed);
        let params = CoarseningParams { strength_threshold: 0.0, ..CoarseningParams::default() };
        let fits = fit_all(&a, &v, &params, None).unwrap();
        let g = strength_graph(&fits, 0.0);
        for (i, f) in fits.iter().enumerate() {
            let sel: Vec<usize> = f.fit().map(|f| f.selected.iter().copied().filter(|&j| j != i).collect()).unwrap_or_default();
            let kept: Vec<usize> = g.edges[i].iter().map(|e| e.0).collect();
            // zero coefficients carry no strength
            prop_assert!(kept.iter().all(|j| sel.contains(j)));
        }
    }
}
