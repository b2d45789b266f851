mod common;

use common::dot;
use lars_amg::coarsening::CoarseningParams;
use lars_amg::dense::{symmetric_eig, Cholesky, DenseMatrix};
use lars_amg::fem::{assemble, disc_mesh, load_vector, DiffusionCoefficients};
use lars_amg::multilevel::{
    bootstrap_vectors, cg, estimate_convergence_factor, estimate_two_grid_factor, pcg, setup,
    setup_initial, vcycle, BootstrapConfig, Hierarchy,
};
use lars_amg::smoother::{random_vectors, SmootherSpec};
use lars_amg::sparse::galerkin;
use lars_amg::CsrMatrix;

fn disc(levels: usize) -> (CsrMatrix, Vec<f64>) {
    let mesh = disc_mesh(levels);
    let (a, interior) = assemble(&mesh, &DiffusionCoefficients::ISOTROPIC).unwrap();
    let b = load_vector(&mesh, &interior);
    (a, b)
}

fn small_cfg() -> BootstrapConfig {
    BootstrapConfig {
        coarsest_cap: 20,
        ..BootstrapConfig::default()
    }
}

fn hierarchy(levels: usize) -> (CsrMatrix, Vec<f64>, Hierarchy) {
    let (a, b) = disc(levels);
    let h = setup(
        &a,
        &SmootherSpec::gauss_seidel(),
        &small_cfg(),
        &CoarseningParams::default(),
        1,
    )
    .unwrap();
    (a, b, h)
}

fn a_norm(a: &CsrMatrix, x: &[f64]) -> f64 {
    dot(x, &a.spmv(x).unwrap()).sqrt()
}

#[test]
fn levels_are_galerkin_products_and_spd() {
    let (_, _, h) = hierarchy(3);
    assert!(h.num_levels() >= 3, "sizes {:?}", h.sizes());
    assert!(h.sizes().windows(2).all(|w| w[1] < w[0]));
    assert!(h.coarsening_ratios().iter().all(|&r| r > 0.0 && r < 1.0));
    assert!(h.operator_complexity() >= 1.0);
    for l in 0..h.num_levels() - 1 {
        let p = h.levels[l].p.as_ref().unwrap();
        assert_eq!(galerkin(&h.levels[l].a, p).unwrap(), h.levels[l + 1].a);
        assert!(h.levels[l + 1].a.is_symmetric(0.0));
        assert!(Cholesky::factor(&h.levels[l + 1].a.to_dense()).is_ok());
    }
    let cp = h.composite_p().unwrap();
    assert_eq!(cp.nrows(), h.sizes()[0]);
    assert_eq!(cp.ncols(), *h.sizes().last().unwrap());
}

#[test]
fn vcycle_is_a_symmetric_preconditioner() {
    let (a, _, h) = hierarchy(3);
    let n = a.nrows();
    let zero = vec![0.0; n];
    let rs = random_vectors(n, 6, 21);
    for pair in rs.chunks(2) {
        let br = vcycle(&h, &pair[0], &zero).unwrap();
        let bs = vcycle(&h, &pair[1], &zero).unwrap();
        let lhs = dot(&br, &pair[1]);
        let rhs = dot(&pair[0], &bs);
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
            "{lhs} vs {rhs}"
        );
        assert!(dot(&br, &pair[0]) > 0.0);
    }
}

#[test]
fn vcycle_contracts_the_error() {
    let (a, _, h) = hierarchy(3);
    let n = a.nrows();
    let zero = vec![0.0; n];
    for e in random_vectors(n, 20, 8) {
        let next = vcycle(&h, &zero, &e).unwrap();
        assert!(a_norm(&a, &next) < a_norm(&a, &e));
    }
    assert!(vcycle(&h, &zero[1..], &zero).is_err());
}

#[test]
fn full_coarse_space_gives_an_exact_two_grid() {
    let (a, _) = disc(2);
    let h = Hierarchy::two_level(
        &a,
        CsrMatrix::identity(a.nrows()),
        &SmootherSpec::gauss_seidel(),
    )
    .unwrap();
    let f = estimate_convergence_factor(&h, 10, 3).unwrap();
    assert!(f <= 1e-8, "factor {f:e}");
}

// The smoother-only estimate converges to the spectral radius of the
// symmetric Gauss-Seidel iteration matrix, computed here densely.
#[test]
fn smoother_only_factor_matches_dense_oracle() {
    let (a, _) = disc(2);
    let n = a.nrows();
    let d = a.to_dense();
    let solve_tri = |lower: bool, rhs: &[f64]| {
        let mut x = vec![0.0; n];
        let order: Vec<usize> = if lower {
            (0..n).collect()
        } else {
            (0..n).rev().collect()
        };
        for &i in &order {
            let s: f64 = (0..n)
                .filter(|&j| if lower { j < i } else { j > i })
                .map(|j| d.get(i, j) * x[j])
                .sum();
            x[i] = (rhs[i] - s) / d.get(i, i);
        }
        x
    };
    // columns of E = (I − U⁻¹A)(I − L⁻¹A)
    let mut e = DenseMatrix::zeros(n, n);
    for c in 0..n {
        let mut x = vec![0.0; n];
        x[c] = 1.0;
        let ax = d.matvec(&x).unwrap();
        let y: Vec<f64> = x
            .iter()
            .zip(solve_tri(true, &ax))
            .map(|(p, q)| p - q)
            .collect();
        let ay = d.matvec(&y).unwrap();
        let z: Vec<f64> = y
            .iter()
            .zip(solve_tri(false, &ay))
            .map(|(p, q)| p - q)
            .collect();
        for r in 0..n {
            e.set(r, c, z[r]);
        }
    }
    // S = Lᵀ E L⁻ᵀ is symmetric with the same spectrum
    let chol = Cholesky::factor(&d).unwrap();
    let l = chol.factor_l();
    let mut linvt = DenseMatrix::zeros(n, n);
    for c in 0..n {
        let mut col = vec![0.0; n];
        col[c] = 1.0;
        chol.backward(&mut col);
        for r in 0..n {
            linvt.set(r, c, col[r]);
        }
    }
    let s = l.transpose().matmul(&e).unwrap().matmul(&linvt).unwrap();
    let (vals, _) = symmetric_eig(&s).unwrap();
    let rho = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = Hierarchy::smoother_only(&a, &SmootherSpec::gauss_seidel()).unwrap();
    let est = estimate_two_grid_factor(&h, 3000, 5).unwrap();
    assert!((est - rho).abs() < 1e-3, "estimate {est} vs oracle {rho}");
}

#[test]
fn pcg_is_fast_and_matches_cg() {
    let (a, b, h) = hierarchy(4);
    let (x, rep) = pcg(&a, &b, Some(&h), 1e-10, 100).unwrap();
    assert!(rep.converged);
    assert!(rep.iterations <= 15, "iterations {}", rep.iterations);
    assert!(rep.relative_residual() <= 1e-10);
    let (y, plain) = cg(&a, &b, 1e-10, 10_000).unwrap();
    assert!(plain.converged);
    assert!(plain.iterations > rep.iterations);
    let diff: f64 = x
        .iter()
        .zip(&y)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-8);
    assert_eq!(rep.residual_history.len(), rep.iterations + 1);
}

#[test]
fn bootstrap_cycle_does_not_degrade() {
    let (a, _) = disc(4);
    let spec = SmootherSpec::gauss_seidel();
    let cp = CoarseningParams::default();
    let cfg0 = BootstrapConfig {
        setup_cycles: 0,
        ..small_cfg()
    };
    let cfg1 = BootstrapConfig {
        setup_cycles: 1,
        ..small_cfg()
    };
    let h0 = setup(&a, &spec, &cfg0, &cp, 2).unwrap();
    let h1 = setup(&a, &spec, &cfg1, &cp, 2).unwrap();
    assert_eq!(h1.setup_cycles_used, 1);
    let f0 = estimate_two_grid_factor(&h0, 40, 1).unwrap();
    let f1 = estimate_two_grid_factor(&h1, 40, 1).unwrap();
    assert!(f1 <= f0 + 0.02, "{f1} after the cycle vs {f0}");
}

#[test]
fn bootstrap_vectors_are_normalized() {
    let (a, _) = disc(3);
    let (h, sets) = setup_initial(
        &a,
        &SmootherSpec::gauss_seidel(),
        &small_cfg(),
        &CoarseningParams::default(),
        1,
    )
    .unwrap();
    assert_eq!(sets.len(), h.num_levels());
    let v = bootstrap_vectors(&h, 2, 4).unwrap();
    assert_eq!(v.len(), 4);
    for x in &v.vectors {
        assert_eq!(x.len(), a.nrows());
        assert!((dot(x, x).sqrt() - 1.0).abs() < 1e-12);
    }
    let single = Hierarchy::smoother_only(&a, &SmootherSpec::gauss_seidel()).unwrap();
    assert!(bootstrap_vectors(&single, 2, 4).is_err());
}

#[test]
fn setup_is_deterministic() {
    let (a, b) = disc(3);
    let run = |seed| {
        let h = setup(
            &a,
            &SmootherSpec::gauss_seidel(),
            &small_cfg(),
            &CoarseningParams::default(),
            seed,
        )
        .unwrap();
        pcg(&a, &b, Some(&h), 1e-10, 100).unwrap().1
    };
    assert_eq!(run(3), run(3));
}

#[test]
fn indefinite_matrix_is_reported() {
    let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
    assert!(cg(&a, &[1.0, 1.0], 1e-12, 10).is_err());
}
