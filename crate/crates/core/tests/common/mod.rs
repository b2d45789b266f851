#![allow(dead_code)]

use lars_amg::dense::DenseMatrix;
use lars_amg::lars::{LarsPath, LarsStep, RegressionProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random problem with unit-norm columns and a unit-norm target.
pub fn random_problem(k: usize, m: usize, seed: u64) -> RegressionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let raw_norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    for (c, &n) in cols.iter_mut().zip(&raw_norms) {
        c.iter_mut().for_each(|v| *v /= n);
    }
    let mut target: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let tn = norm(&target);
    target.iter_mut().for_each(|v| *v /= tn);
    problem_from_columns(&cols, target)
}

pub fn problem_from_columns(cols: &[Vec<f64>], target: Vec<f64>) -> RegressionProblem {
    let m = cols.len();
    RegressionProblem {
        center: 0,
        target,
        design: DenseMatrix::from_columns(cols).unwrap(),
        column_ids: (1..=m).collect(),
        raw_norms: vec![1.0; m],
        kernel_weights: vec![1.0; m],
        dropped_zero_columns: Vec::new(),
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting on a small dense system.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        m.swap(c, p);
        rhs.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    x
}

/// Least squares through the normal equations.
pub fn normal_equations_lsq(w: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    let m = w.ncols();
    let cols: Vec<Vec<f64>> = (0..m).map(|j| w.column(j)).collect();
    let gram = (0..m)
        .map(|i| (0..m).map(|j| dot(&cols[i], &cols[j])).collect())
        .collect();
    let rhs = cols.iter().map(|c| dot(c, v)).collect();
    gauss_solve(gram, rhs)
}

/// `Wᵀ(v − Wx)` recomputed from scratch.
pub fn correlations(prob: &RegressionProblem, x: &[f64]) -> Vec<f64> {
    let wx = prob.design.matvec(x).unwrap();
    let r: Vec<f64> = prob.target.iter().zip(&wx).map(|(a, b)| a - b).collect();
    (0..x.len())
        .map(|j| dot(&prob.design.column(j), &r))
        .collect()
}

/// Largest violation of the lasso optimality conditions at a path vertex,
/// with λ taken as the largest absolute correlation.
pub fn kkt_violation(prob: &RegressionProblem, step: &LarsStep) -> f64 {
    let rho = correlations(prob, &step.x);
    let lambda = rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut worst = 0.0f64;
    for (j, (&xj, &rj)) in step.x.iter().zip(&rho).enumerate() {
        worst = worst.max(rj.abs() - lambda);
        if xj != 0.0 {
            worst = worst.max((rj - lambda * xj.signum()).abs());
            assert!(
                step.active.contains(&j),
                "nonzero coefficient outside the active set"
            );
        }
    }
    worst
}

/// Same for the sign-constrained problem, in the sign-scaled coordinates.
pub fn signed_kkt_violation(prob: &RegressionProblem, path: &LarsPath, step: &LarsStep) -> f64 {
    let s = path.signs.as_ref().expect("signed path records signs");
    let rho = correlations(prob, &step.x);
    let scaled: Vec<f64> = rho.iter().zip(s).map(|(r, s)| r * s).collect();
    let lambda = scaled.iter().fold(0.0f64, |m, &r| m.max(r));
    let mut worst = 0.0f64;
    for j in 0..rho.len() {
        worst = worst.max(scaled[j] - lambda);
        if step.x[j] != 0.0 {
            worst = worst.max((scaled[j] - lambda).abs());
        }
    }
    worst
}

/// Spread of the absolute correlations over the active set.
pub fn active_correlation_spread(step: &LarsStep) -> f64 {
    let vals: Vec<f64> = step.active.iter().map(|&j| step.rho[j].abs()).collect();
    let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
    if vals.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
