//! Compressed sparse row storage and the handful of kernels the multigrid
//! setup needs: products, transposes, Galerkin triple products and
//! graph-distance neighborhoods.

use std::collections::VecDeque;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Real CSR matrix.
///
/// Column indices are strictly increasing within each row and no exact zero
/// is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, keeping input order within a row so duplicate sums
        // are accumulated in a fixed order
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); entries.len()];
        for &(r, c, v) in entries {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        for i in 0..nrows {
            let row = &mut bucket[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == col {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_indices.push(col);
                    values.push(sum);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles from already sorted, duplicate-free rows.
    pub(crate) fn from_sorted_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < ncols);
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let rows = (0..d.nrows())
            .map(|i| {
                (0..d.ncols())
                    .filter_map(|j| {
                        let v = d.get(i, j);
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_sorted_rows(d.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "spmv: {} columns but vector of length {}",
                self.ncols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation; panics on dimension mismatch.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            *yi = s;
        }
    }

    /// `y = Aᵀ x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "transpose spmv: {} rows but vector of length {}",
                self.nrows,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in increasing order, so each transposed row comes
        // out sorted
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col_indices[next[c]] = i;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Sparse product `self * rhs` with a dense row accumulator.
    pub fn matmul(&self, rhs: &CsrMatrix) -> Result<Self> {
        if self.ncols != rhs.nrows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut acc = vec![0.0; rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut rows = Vec::with_capacity(self.nrows);
        let mut pattern = Vec::new();
        for i in 0..self.nrows {
            pattern.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rcols, rvals) = rhs.row(k);
                for (&j, &b) in rcols.iter().zip(rvals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            rows.push(pattern.iter().map(|&j| (j, acc[j])).collect());
        }
        Ok(Self::from_sorted_rows(rhs.ncols, rows))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entry of `|A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.asymmetry() <= tol
    }

    /// `½(A + Aᵀ)`.
    pub fn symmetrize(&self) -> Self {
        let t = self.transpose();
        let rows = (0..self.nrows)
            .map(|i| {
                let (ca, va) = self.row(i);
                let (cb, vb) = t.row(i);
                merge_rows(ca, va, cb, vb, |a, b| 0.5 * (a + b))
            })
            .collect();
        Self::from_sorted_rows(self.ncols, rows)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d.set(i, c, v);
            }
        }
        d
    }

    /// Triplet list in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (i, c, v)));
        }
        out
    }
}

fn merge_rows(
    ca: &[usize],
    va: &[f64],
    cb: &[usize],
    vb: &[f64],
    f: impl Fn(f64, f64) -> f64,
) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(ca.len().max(cb.len()));
    let (mut p, mut q) = (0, 0);
    while p < ca.len() || q < cb.len() {
        if q == cb.len() || (p < ca.len() && ca[p] < cb[q]) {
            out.push((ca[p], f(va[p], 0.0)));
            p += 1;
        } else if p == ca.len() || cb[q] < ca[p] {
            out.push((cb[q], f(0.0, vb[q])));
            q += 1;
        } else {
            out.push((ca[p], f(va[p], vb[q])));
            p += 1;
            q += 1;
        }
    }
    out
}

/// Galerkin coarse operator `PᵀAP`, computed as `Pᵀ(AP)`.
///
/// When `a` is symmetric the product is checked for asymmetry (relative
/// `1e-12` of its largest entry) and returned exactly symmetrized.
pub fn galerkin(a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    if a.nrows != a.ncols || p.nrows != a.nrows {
        return Err(Error::DimensionMismatch(format!(
            "galerkin: A is {}x{}, P is {}x{}",
            a.nrows, a.ncols, p.nrows, p.ncols
        )));
    }
    let ap = a.matmul(p)?;
    let m = p.transpose().matmul(&ap)?;
    if !a.is_symmetric(0.0) {
        return Ok(m);
    }
    let tol = 1e-12 * m.max_abs();
    let asym = m.asymmetry();
    if asym > tol {
        return Err(Error::Asymmetric { asym, tol });
    }
    Ok(m.symmetrize())
}

/// Graph-distance ball around a variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: usize,
    /// `(variable, distance)` sorted by distance, then index. The center comes
    /// first with distance 0.
    pub members: Vec<(usize, usize)>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Undirected adjacency of the off-diagonal pattern of `A + Aᵀ`.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    pub fn from_matrix(a: &CsrMatrix) -> Self {
        let n = a.nrows.max(a.ncols);
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..a.nrows {
            let (cols, _) = a.row(i);
            for &j in cols {
                if j != i {
                    lists[i].push(j);
                    lists[j].push(i);
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            targets.extend(l);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Breadth-first ball of the given radius around `center`.
    pub fn ball(&self, center: usize, radius: usize) -> Result<Neighborhood> {
        if center >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "variable {center} out of range for graph of size {}",
                self.len()
            )));
        }
        let mut members = vec![(center, 0usize)];
        let mut queue = VecDeque::from([(center, 0usize)]);
        // the ball is small; linear membership checks are cheaper than a set
        while let Some((v, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for &w in self.neighbors(v) {
                if !members.iter().any(|&(m, _)| m == w) {
                    members.push((w, d + 1));
                    queue.push_back((w, d + 1));
                }
            }
        }
        members.sort_by_key(|&(v, d)| (d, v));
        Ok(Neighborhood { center, members })
    }
}

/// All variables within `radius` graph steps of `i` in the symmetrized
/// off-diagonal pattern of `a`.
pub fn graph_neighborhood(a: &CsrMatrix, i: usize, radius: usize) -> Result<Neighborhood> {
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch(
            "graph neighborhood needs a square matrix".into(),
        ));
    }
    if radius == 0 {
        return Err(Error::InvalidArgument("radius must be at least 1".into()));
    }
    Adjacency::from_matrix(a).ball(i, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 2.0);
    }

    #[test]
    fn rows_are_sorted() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 3.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(a.row(0).0, &[0, 1]);
    }

    #[test]
    fn exact_cancellation_is_dropped() {
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, -1.0)]).unwrap();
        assert_eq!(a.nnz(), 0);
        assert_eq!(a.row_offsets(), &[0, 0]);
    }

    #[test]
    fn out_of_range_triplet() {
        assert!(matches!(
            CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn spmv_basics() {
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x);
        let a = tridiag(2);
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert!(a.spmv(&[1.0]).is_err());
    }

    #[test]
    fn diagonal_transpose_is_identity_op() {
        let d = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        assert_eq!(d.transpose(), d);
    }

    #[test]
    fn galerkin_examples() {
        let a = tridiag(2);
        let p = CsrMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let c = galerkin(&a, &p).unwrap();
        assert_eq!(c.to_dense().values(), &[2.0]);

        let a = tridiag(5);
        assert_eq!(galerkin(&a, &CsrMatrix::identity(5)).unwrap(), a);

        let p =
            CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5), (2, 1, 2.0)])
                .unwrap();
        let g = galerkin(&CsrMatrix::identity(3), &p).unwrap();
        let ptp = p.transpose().matmul(&p).unwrap();
        assert_eq!(g, ptp);
    }

    #[test]
    fn galerkin_dimension_mismatch() {
        let p = CsrMatrix::identity(3);
        assert!(galerkin(&tridiag(2), &p).is_err());
    }

    #[test]
    fn neighborhood_on_path() {
        let a = tridiag(6);
        let nb = graph_neighborhood(&a, 3, 1).unwrap();
        assert_eq!(nb.members, vec![(3, 0), (2, 1), (4, 1)]);
        let nb = graph_neighborhood(&a, 0, 2).unwrap();
        assert_eq!(nb.members, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(graph_neighborhood(&a, 6, 1).is_err());
        assert!(graph_neighborhood(&a, 0, 0).is_err());
    }

    #[test]
    fn symmetrize_averages() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 4.0), (0, 0, 1.0)]).unwrap();
        let s = a.symmetrize();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.get(1, 0), 3.0);
        assert_eq!(s.get(0, 0), 1.0);
    }
}
