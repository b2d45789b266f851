//! Small dense kernels: pivoted QR least squares, Cholesky, and a cyclic
//! Jacobi eigensolver for symmetric (generalized) problems.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            values: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {nrows}x{ncols} matrix",
                values.len()
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            values,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != nrows {
                return Err(Error::DimensionMismatch("ragged columns".into()));
            }
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.ncols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.ncols != rhs.nrows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut out = Self::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.ncols {
                    out.values[i * rhs.ncols + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} columns, vector of length {}",
                self.ncols,
                x.len()
            )));
        }
        Ok((0..self.nrows)
            .map(|i| {
                self.values[i * self.ncols..(i + 1) * self.ncols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Householder QR with column pivoting, stored LAPACK style: `R` in the upper
/// triangle, reflector tails below the diagonal.
struct PivotedQr {
    qr: DenseMatrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

fn householder_qr(mut a: DenseMatrix, pivot: bool) -> PivotedQr {
    let (m, n) = (a.nrows, a.ncols);
    let steps = m.min(n);
    let mut tau = vec![0.0; steps];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..steps {
        if pivot {
            // recomputed norms; these systems have a handful of columns
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let s: f64 = (k..m).map(|i| a.get(i, j).powi(2)).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    let t = a.get(i, k);
                    a.set(i, k, a.get(i, best));
                    a.set(i, best, t);
                }
                perm.swap(k, best);
            }
        }
        let norm: f64 = (k..m).map(|i| a.get(i, k).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            tau[k] = 0.0;
            continue;
        }
        let alpha = a.get(k, k);
        let beta = if alpha >= 0.0 { -norm } else { norm };
        let v0 = alpha - beta;
        for i in k + 1..m {
            a.set(i, k, a.get(i, k) / v0);
        }
        tau[k] = (beta - alpha) / beta;
        a.set(k, k, beta);
        for j in k + 1..n {
            let mut s = a.get(k, j);
            for i in k + 1..m {
                s += a.get(i, k) * a.get(i, j);
            }
            s *= tau[k];
            a.set(k, j, a.get(k, j) - s);
            for i in k + 1..m {
                a.set(i, j, a.get(i, j) - s * a.get(i, k));
            }
        }
    }
    PivotedQr { qr: a, tau, perm }
}

impl PivotedQr {
    /// Overwrites `b` with `Qᵀ b`.
    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.qr.nrows;
        for k in 0..self.tau.len() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in k + 1..m {
                s += self.qr.get(i, k) * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in k + 1..m {
                b[i] -= s * self.qr.get(i, k);
            }
        }
    }

    /// Overwrites `b` with `Q b`.
    fn apply_q(&self, b: &mut [f64]) {
        let m = self.qr.nrows;
        for k in (0..self.tau.len()).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in k + 1..m {
                s += self.qr.get(i, k) * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in k + 1..m {
                b[i] -= s * self.qr.get(i, k);
            }
        }
    }
}

/// Least squares solution with a rank-deficiency indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    pub rank: usize,
}

impl LstsqSolution {
    pub fn rank_deficient(&self, ncols: usize) -> bool {
        self.rank < ncols
    }
}

/// Minimizes `‖v − W x‖₂` by column-pivoted QR.
///
/// Trailing diagonal entries of `R` below `1e-12` times the largest one are
/// treated as zero; in that case the minimum-norm minimizer is returned via a
/// second QR of the leading rows of `R`.
pub fn solve_dense_lsq(w: &DenseMatrix, v: &[f64]) -> Result<LstsqSolution> {
    let (m, n) = (w.nrows, w.ncols);
    if v.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "lsq: {m} rows, right-hand side of length {}",
            v.len()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(LstsqSolution {
            x: vec![0.0; n],
            rank: 0,
        });
    }
    let f = householder_qr(w.clone(), true);
    let steps = m.min(n);
    let rmax = f.qr.get(0, 0).abs();
    let rank = if rmax == 0.0 {
        0
    } else {
        (0..steps)
            .take_while(|&k| f.qr.get(k, k).abs() > 1e-12 * rmax)
            .count()
    };
    let mut c = v.to_vec();
    f.apply_qt(&mut c);

    let mut y = vec![0.0; n];
    if rank == n {
        for k in (0..n).rev() {
            let mut s = c[k];
            for j in k + 1..n {
                s -= f.qr.get(k, j) * y[j];
            }
            y[k] = s / f.qr.get(k, k);
        }
    } else if rank > 0 {
        // [R11 R12] y = c has many solutions; the minimum-norm one comes from
        // the QR of its transpose: Tᵀ = Z S, y = Z S⁻ᵀ c
        let mut tt = DenseMatrix::zeros(n, rank);
        for i in 0..rank {
            for j in i..n {
                tt.set(j, i, f.qr.get(i, j));
            }
        }
        let g = householder_qr(tt, false);
        let mut z = vec![0.0; n];
        for i in 0..rank {
            let mut s = c[i];
            for k in 0..i {
                s -= g.qr.get(k, i) * z[k];
            }
            z[i] = s / g.qr.get(i, i);
        }
        g.apply_q(&mut z);
        y = z;
    }
    let mut x = vec![0.0; n];
    for (k, &p) in f.perm.iter().enumerate() {
        x[p] = y[k];
    }
    Ok(LstsqSolution { x, rank })
}

/// Lower triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.nrows;
        if a.ncols != n {
            return Err(Error::DimensionMismatch(
                "Cholesky needs a square matrix".into(),
            ));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l.get(j, k).powi(2);
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: j, pivot: d });
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows
    }

    pub fn factor_l(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l.get(i, k) * b[k];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * b[k];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Fails on a pivot whose magnitude is below `1e-14` times the largest
    /// entry of `a`.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.nrows;
        if a.ncols != n {
            return Err(Error::DimensionMismatch("LU needs a square matrix".into()));
        }
        let scale = a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| {
                    lu.get(i, k)
                        .abs()
                        .total_cmp(&lu.get(j, k).abs())
                        .then(j.cmp(&i))
                })
                .unwrap_or(k);
            let pivot = lu.get(p, k);
            if pivot.abs() <= 1e-14 * scale || scale == 0.0 {
                return Err(Error::NotPositiveDefinite { row: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = lu.get(i, k) / pivot;
                lu.set(i, k, f);
                for j in k + 1..n {
                    lu.set(i, j, lu.get(i, j) - f * lu.get(k, j));
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu.get(i, k) * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu.get(i, k) * x[k];
            }
            x[i] /= self.lu.get(i, i);
        }
        x
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues ascend; eigenvectors are the columns of the returned matrix.
pub fn symmetric_eig(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.nrows;
    if a.ncols != n {
        return Err(Error::DimensionMismatch(
            "eigensolver needs a square matrix".into(),
        ));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let fro = a.frobenius_norm();
    let off = |m: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&m) <= 1e-12 * fro {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).total_cmp(&m.get(j, j)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, v.get(k, src));
        }
    }
    Ok((values, vectors))
}

/// The `k` algebraically smallest eigenpairs of `A v = λ B v` with `B`
/// symmetric positive definite. Eigenvectors are `B`-orthonormal columns.
pub fn dense_sym_generalized_eig(
    a: &DenseMatrix,
    b: &DenseMatrix,
    k: usize,
) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.nrows;
    if a.ncols != n || b.nrows != n || b.ncols != n {
        return Err(Error::DimensionMismatch(
            "generalized eigenproblem shapes".into(),
        ));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} pencil"
        )));
    }
    let chol = Cholesky::factor(b)?;
    // C = L⁻¹ A L⁻ᵀ, built column by column
    let mut y = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = a.column(j);
        chol.forward(&mut col);
        for i in 0..n {
            y.set(i, j, col[i]);
        }
    }
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut row: Vec<f64> = (0..n).map(|j| y.get(i, j)).collect();
        chol.forward(&mut row);
        for j in 0..n {
            c.set(i, j, row[j]);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (c.get(i, j) + c.get(j, i));
            c.set(i, j, s);
            c.set(j, i, s);
        }
    }
    let (vals, u) = symmetric_eig(&c)?;
    let mut vecs = DenseMatrix::zeros(n, k);
    for col in 0..k {
        let mut x = u.column(col);
        chol.backward(&mut x);
        for i in 0..n {
            vecs.set(i, col, x[i]);
        }
    }
    Ok((vals[..k].to_vec(), vecs))
}
