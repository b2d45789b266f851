//! Gauss-Seidel relaxation (pointwise and block) and test-vector generation.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{DenseMatrix, Lu};
use crate::error::{Error, Result};
use crate::sparse::{Adjacency, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepDirection {
    #[default]
    Forward,
    Backward,
    /// Forward followed by backward.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmootherKind {
    #[default]
    GaussSeidel,
    BlockGaussSeidel,
}

/// Assignment of every variable to exactly one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub block_of: Vec<usize>,
    pub nblocks: usize,
}

impl BlockPartition {
    /// Variables of each block, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nblocks];
        for (v, &b) in self.block_of.iter().enumerate() {
            out[b].push(v);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmootherSpec {
    pub kind: SmootherKind,
    /// Direction used when relaxing test vectors.
    pub direction: SweepDirection,
    /// Present exactly when `kind` is block Gauss-Seidel.
    pub blocks: Option<BlockPartition>,
}

impl SmootherSpec {
    pub fn gauss_seidel() -> Self {
        Self::default()
    }

    pub fn block_gauss_seidel(blocks: BlockPartition) -> Self {
        Self {
            kind: SmootherKind::BlockGaussSeidel,
            direction: SweepDirection::Forward,
            blocks: Some(blocks),
        }
    }
}

/// One Gauss-Seidel sweep on `A x = b`, updating `x` in place.
pub fn gs_sweep(a: &CsrMatrix, x: &mut [f64], b: &[f64], direction: SweepDirection) -> Result<()> {
    check_dims(a, x, b)?;
    let diag = checked_diagonal(a)?;
    gs_with_diag(a, &diag, x, b, direction);
    Ok(())
}

fn check_dims(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() || x.len() != a.nrows() || b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "relaxation on {}x{} with x of length {} and b of length {}",
            a.nrows(),
            a.ncols(),
            x.len(),
            b.len()
        )));
    }
    Ok(())
}

fn checked_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    let d = a.diagonal();
    match d.iter().position(|&v| v == 0.0) {
        Some(i) => Err(Error::ZeroDiagonal(i)),
        None => Ok(d),
    }
}

#[inline]
fn relax_row(a: &CsrMatrix, diag: &[f64], x: &mut [f64], b: &[f64], i: usize) {
    let (cols, vals) = a.row(i);
    let mut s = b[i];
    for (&j, &v) in cols.iter().zip(vals) {
        if j != i {
            s -= v * x[j];
        }
    }
    x[i] = s / diag[i];
}

fn gs_with_diag(a: &CsrMatrix, diag: &[f64], x: &mut [f64], b: &[f64], dir: SweepDirection) {
    let n = a.nrows();
    if matches!(dir, SweepDirection::Forward | SweepDirection::Symmetric) {
        for i in 0..n {
            relax_row(a, diag, x, b, i);
        }
    }
    if matches!(dir, SweepDirection::Backward | SweepDirection::Symmetric) {
        for i in (0..n).rev() {
            relax_row(a, diag, x, b, i);
        }
    }
}

/// Greedy BFS aggregation into blocks of at most `⌈n / nblocks⌉` variables.
///
/// Each block is seeded at the lowest unassigned index and grown breadth
/// first through unassigned neighbors; a block that runs out of reachable
/// variables closes early, so more than `nblocks` blocks can result on
/// disconnected graphs.
pub fn build_blocks(a: &CsrMatrix, nblocks: usize) -> Result<BlockPartition> {
    let n = a.nrows();
    if nblocks == 0 || nblocks > n.max(1) {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} variables into {nblocks} blocks"
        )));
    }
    let size = n.div_ceil(nblocks);
    let adj = Adjacency::from_matrix(a);
    let mut block_of = vec![usize::MAX; n];
    let mut count = 0;
    let mut seed = 0;
    while seed < n {
        if block_of[seed] != usize::MAX {
            seed += 1;
            continue;
        }
        let mut filled = 1;
        block_of[seed] = count;
        let mut queue = VecDeque::from([seed]);
        'grow: while let Some(v) = queue.pop_front() {
            for &w in adj.neighbors(v) {
                if filled == size {
                    break 'grow;
                }
                if block_of[w] == usize::MAX {
                    block_of[w] = count;
                    filled += 1;
                    queue.push_back(w);
                }
            }
        }
        count += 1;
    }
    Ok(BlockPartition {
        block_of,
        nblocks: count,
    })
}

struct Block {
    vars: Vec<usize>,
    lu: Lu,
}

/// A smoother prepared for repeated application to one matrix.
pub struct Smoother {
    diag: Vec<f64>,
    blocks: Option<Vec<Block>>,
}

impl std::fmt::Debug for Smoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Smoother")
            .field("n", &self.diag.len())
            .field("blocks", &self.blocks.as_ref().map(Vec::len))
            .finish()
    }
}

impl Smoother {
    pub fn new(a: &CsrMatrix, spec: &SmootherSpec) -> Result<Self> {
        let diag = checked_diagonal(a)?;
        let blocks = match (spec.kind, &spec.blocks) {
            (SmootherKind::GaussSeidel, None) => None,
            (SmootherKind::BlockGaussSeidel, Some(p)) => {
                if p.block_of.len() != a.nrows() {
                    return Err(Error::DimensionMismatch(
                        "block partition does not match matrix".into(),
                    ));
                }
                let mut blocks = Vec::with_capacity(p.nblocks);
                for (bi, vars) in p.members().into_iter().enumerate() {
                    let mut local = DenseMatrix::zeros(vars.len(), vars.len());
                    for (r, &i) in vars.iter().enumerate() {
                        let (cols, vals) = a.row(i);
                        for (&j, &v) in cols.iter().zip(vals) {
                            if let Ok(c) = vars.binary_search(&j) {
                                local.set(r, c, v);
                            }
                        }
                    }
                    let lu = Lu::factor(&local).map_err(|_| Error::SingularBlock(bi))?;
                    blocks.push(Block { vars, lu });
                }
                Some(blocks)
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "block partition must be given exactly for block Gauss-Seidel".into(),
                ))
            }
        };
        Ok(Self { diag, blocks })
    }

    /// One sweep in the given direction.
    pub fn sweep(&self, a: &CsrMatrix, x: &mut [f64], b: &[f64], dir: SweepDirection) {
        match &self.blocks {
            None => gs_with_diag(a, &self.diag, x, b, dir),
            Some(blocks) => {
                if matches!(dir, SweepDirection::Forward | SweepDirection::Symmetric) {
                    for blk in blocks {
                        solve_block(a, blk, x, b);
                    }
                }
                if matches!(dir, SweepDirection::Backward | SweepDirection::Symmetric) {
                    for blk in blocks.iter().rev() {
                        solve_block(a, blk, x, b);
                    }
                }
            }
        }
    }
}

fn solve_block(a: &CsrMatrix, blk: &Block, x: &mut [f64], b: &[f64]) {
    let rhs: Vec<f64> = blk
        .vars
        .iter()
        .map(|&i| {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if blk.vars.binary_search(&j).is_err() {
                    s -= v * x[j];
                }
            }
            s
        })
        .collect();
    for (&i, v) in blk.vars.iter().zip(blk.lu.solve(&rhs)) {
        x[i] = v;
    }
}

/// One forward block Gauss-Seidel sweep over the blocks in index order.
pub fn block_gs_sweep(
    a: &CsrMatrix,
    blocks: &BlockPartition,
    x: &mut [f64],
    b: &[f64],
) -> Result<()> {
    check_dims(a, x, b)?;
    let s = Smoother::new(a, &SmootherSpec::block_gauss_seidel(blocks.clone()))?;
    s.sweep(a, x, b, SweepDirection::Forward);
    Ok(())
}

/// Test vectors with per-vector weights `ω_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVectorSet {
    pub vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TestVectorSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        let weights = vec![1.0; vectors.len()];
        Self { vectors, weights }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Relaxes every vector `sweeps` times on `A x = 0`, then rescales to unit
    /// norm.
    pub fn smooth(
        &mut self,
        a: &CsrMatrix,
        smoother: &Smoother,
        dir: SweepDirection,
        sweeps: usize,
    ) {
        let zero = vec![0.0; a.nrows()];
        for v in &mut self.vectors {
            for _ in 0..sweeps {
                smoother.sweep(a, v, &zero, dir);
            }
            normalize(v);
        }
    }

    pub fn extend(&mut self, other: TestVectorSet) {
        self.vectors.extend(other.vectors);
        self.weights.extend(other.weights);
    }
}

pub(crate) fn normalize(v: &mut [f64]) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// `count` standard normal vectors drawn from ChaCha8 seeded with `seed`,
/// vector after vector, entries in index order.
pub fn random_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Random vectors relaxed `nu` times on the homogeneous system and
/// normalized, all with weight 1.
pub fn generate_test_vectors(
    a: &CsrMatrix,
    count: usize,
    nu: usize,
    spec: &SmootherSpec,
    seed: u64,
) -> Result<TestVectorSet> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "need at least one test vector".into(),
        ));
    }
    let smoother = Smoother::new(a, spec)?;
    let mut set = TestVectorSet::new(random_vectors(a.nrows(), count, seed));
    set.smooth(a, &smoother, spec.direction, nu);
    Ok(set)
}
