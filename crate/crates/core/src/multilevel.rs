//! Multigrid hierarchy, bootstrap setup, V(1,1)-cycle and preconditioned CG.

use std::fmt::Write as _;

use crate::coarsening::{build_p, lar_coarsening, CoarseningParams, Interpolation};
use crate::dense::{dense_sym_generalized_eig, Cholesky};
use crate::error::{Error, Result};
use crate::smoother::{
    generate_test_vectors, normalize, random_vectors, Smoother, SmootherSpec, SweepDirection,
    TestVectorSet,
};
use crate::sparse::{galerkin, CsrMatrix};

/// Largest coarse level factored densely for two-grid estimates.
const DIRECT_LIMIT: usize = 1500;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    /// Number of random test vectors `K`.
    pub k: usize,
    /// Relaxation sweeps applied to test vectors on every level.
    pub nu: usize,
    /// Bootstrap rebuilds after the initial setup leg.
    pub setup_cycles: usize,
    /// Coarsest-grid eigenvectors added per bootstrap cycle.
    pub n_eigenvectors: usize,
    /// Levels at or below this size are solved directly.
    pub coarsest_cap: usize,
    pub max_levels: usize,
    pub pcg_tolerance: f64,
    pub pcg_max_iterations: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            k: 8,
            nu: 4,
            setup_cycles: 1,
            n_eigenvectors: 8,
            coarsest_cap: 60,
            max_levels: 25,
            pcg_tolerance: 1e-10,
            pcg_max_iterations: 500,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("K must be positive".into()));
        }
        if self.n_eigenvectors > self.k {
            return Err(Error::InvalidArgument(
                "n_eigenvectors must not exceed K".into(),
            ));
        }
        if self.coarsest_cap < self.n_eigenvectors.max(1) {
            return Err(Error::InvalidArgument(
                "coarsest_cap must be at least n_eigenvectors".into(),
            ));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidArgument("max_levels must be positive".into()));
        }
        if !(self.pcg_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "pcg tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Default bootstrap schedule by problem size: one cycle below 10³
    /// unknowns, two above.
    pub fn default_cycles(n: usize) -> usize {
        if n < 1000 {
            1
        } else {
            2
        }
    }
}

#[derive(Debug)]
pub struct Level {
    pub a: CsrMatrix,
    /// Interpolation from the next coarser level; absent on the coarsest.
    pub p: Option<CsrMatrix>,
    pub smoother_spec: SmootherSpec,
    pub smoother: Smoother,
    pub interp: Option<Interpolation>,
}

impl Level {
    fn new(a: CsrMatrix, spec: SmootherSpec) -> Result<Self> {
        let smoother = Smoother::new(&a, &spec)?;
        Ok(Self {
            a,
            p: None,
            smoother_spec: spec,
            smoother,
            interp: None,
        })
    }

    pub fn size(&self) -> usize {
        self.a.nrows()
    }
}

/// Treatment of the coarsest level of a cycle.
#[derive(Debug)]
pub enum CoarseSolver {
    /// Dense Cholesky factorization.
    Direct(Cholesky),
    /// Conjugate gradients preconditioned by a V-cycle of the given
    /// hierarchy, run to a relative residual of 1e-14. Used for exact coarse
    /// solves where a dense factorization would be too large.
    Iterative(Box<Hierarchy>),
    /// No coarse correction: a symmetric smoothing sweep.
    SmoothOnly,
}

#[derive(Debug)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub coarsest_solver: CoarseSolver,
    pub setup_cycles_used: usize,
}

impl Hierarchy {
    /// Hierarchy made of the smoother alone.
    pub fn smoother_only(a: &CsrMatrix, spec: &SmootherSpec) -> Result<Self> {
        Ok(Self {
            levels: vec![Level::new(a.clone(), spec.clone())?],
            coarsest_solver: CoarseSolver::SmoothOnly,
            setup_cycles_used: 0,
        })
    }

    /// Two-level hierarchy from a given interpolation, with the Galerkin
    /// coarse matrix solved directly.
    pub fn two_level(a: &CsrMatrix, p: CsrMatrix, spec: &SmootherSpec) -> Result<Self> {
        let ac = galerkin(a, &p)?;
        let chol = Cholesky::factor(&ac.to_dense())?;
        let mut fine = Level::new(a.clone(), spec.clone())?;
        fine.p = Some(p);
        Ok(Self {
            levels: vec![fine, Level::new(ac, SmootherSpec::gauss_seidel())?],
            coarsest_solver: CoarseSolver::Direct(chol),
            setup_cycles_used: 0,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Level::size).collect()
    }

    /// `n_{ℓ+1} / n_ℓ` for every coarsening step.
    pub fn coarsening_ratios(&self) -> Vec<f64> {
        self.sizes()
            .windows(2)
            .map(|w| w[1] as f64 / w[0] as f64)
            .collect()
    }

    /// Operator complexity `Σ nnz(A_ℓ) / nnz(A_0)`.
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum();
        total as f64 / self.levels[0].a.nnz().max(1) as f64
    }

    /// Two-level truncation with an exact solve on the second level.
    pub fn two_grid(&self) -> Result<Hierarchy> {
        if self.levels.len() < 2 {
            return Err(Error::TooFewLevels(self.levels.len()));
        }
        let fine = &self.levels[0];
        let coarse = &self.levels[1];
        let mut l0 = Level::new(fine.a.clone(), fine.smoother_spec.clone())?;
        l0.p = fine.p.clone();
        l0.interp = fine.interp.clone();
        let l1 = Level::new(coarse.a.clone(), SmootherSpec::gauss_seidel())?;
        let solver = if self.levels.len() == 2 || coarse.size() <= DIRECT_LIMIT {
            CoarseSolver::Direct(Cholesky::factor(&coarse.a.to_dense())?)
        } else {
            CoarseSolver::Iterative(Box::new(self.tail(1)?))
        };
        Ok(Hierarchy {
            levels: vec![l0, l1],
            coarsest_solver: solver,
            setup_cycles_used: self.setup_cycles_used,
        })
    }

    /// Copy of the levels from `start` on, with the same coarsest solve.
    fn tail(&self, start: usize) -> Result<Hierarchy> {
        let mut levels = Vec::new();
        for lvl in &self.levels[start..] {
            let mut l = Level::new(lvl.a.clone(), lvl.smoother_spec.clone())?;
            l.p = lvl.p.clone();
            l.interp = lvl.interp.clone();
            levels.push(l);
        }
        let last = &levels.last().expect("nonempty").a;
        let solver = match &self.coarsest_solver {
            CoarseSolver::SmoothOnly => CoarseSolver::SmoothOnly,
            _ => CoarseSolver::Direct(Cholesky::factor(&last.to_dense())?),
        };
        Ok(Hierarchy {
            levels,
            coarsest_solver: solver,
            setup_cycles_used: self.setup_cycles_used,
        })
    }

    /// Product of all interpolations, mapping the coarsest level to the
    /// finest.
    pub fn composite_p(&self) -> Result<CsrMatrix> {
        let mut acc: Option<CsrMatrix> = None;
        for lvl in &self.levels[..self.levels.len() - 1] {
            let p = lvl
                .p
                .as_ref()
                .ok_or(Error::TooFewLevels(self.levels.len()))?;
            acc = Some(match acc {
                None => p.clone(),
                Some(q) => q.matmul(p)?,
            });
        }
        acc.ok_or(Error::TooFewLevels(self.levels.len()))
    }
}

fn coarsen_once(
    a: &CsrMatrix,
    vectors: &TestVectorSet,
    cparams: &CoarseningParams,
) -> Result<Interpolation> {
    let (interp, _) = lar_coarsening(a, vectors, cparams)?;
    if interp.n_coarse() < interp.n() {
        return Ok(interp);
    }
    let mut retry = cparams.clone();
    retry.strength_threshold = 0.0;
    let (interp, _) = lar_coarsening(a, vectors, &retry)?;
    Ok(interp)
}

/// Builds the hierarchy below `a` from the given finest-level test vectors.
/// Returns the hierarchy and the test vectors used on each coarsened level.
pub fn build_hierarchy(
    a: &CsrMatrix,
    fine_spec: &SmootherSpec,
    vectors: TestVectorSet,
    cfg: &BootstrapConfig,
    cparams: &CoarseningParams,
) -> Result<(Hierarchy, Vec<TestVectorSet>)> {
    let mut levels = Vec::new();
    let mut sets = Vec::new();
    let mut current = Level::new(a.clone(), fine_spec.clone())?;
    let mut vecs = vectors;
    while current.size() > cfg.coarsest_cap && levels.len() + 1 < cfg.max_levels {
        let n = current.size();
        let interp = coarsen_once(&current.a, &vecs, cparams)?;
        if interp.n_coarse() == n {
            return Err(Error::CoarseningStagnation {
                level: levels.len(),
                n,
            });
        }
        let p = build_p(&interp)?;
        let ac = galerkin(&current.a, &p)?;
        let next = Level::new(ac, SmootherSpec::gauss_seidel())?;
        let mut restricted = TestVectorSet {
            vectors: vecs
                .vectors
                .iter()
                .map(|v| p.spmv_transpose(v))
                .collect::<Result<_>>()?,
            weights: vecs.weights.clone(),
        };
        restricted.smooth(&next.a, &next.smoother, SweepDirection::Forward, cfg.nu);
        current.p = Some(p);
        current.interp = Some(interp);
        levels.push(current);
        sets.push(vecs);
        current = next;
        vecs = restricted;
    }
    let chol = Cholesky::factor(&current.a.to_dense())?;
    levels.push(current);
    sets.push(vecs);
    Ok((
        Hierarchy {
            levels,
            coarsest_solver: CoarseSolver::Direct(chol),
            setup_cycles_used: 0,
        },
        sets,
    ))
}

/// First setup leg: smoothed random test vectors, then recursive coarsening.
pub fn setup_initial(
    a: &CsrMatrix,
    spec: &SmootherSpec,
    cfg: &BootstrapConfig,
    cparams: &CoarseningParams,
    seed: u64,
) -> Result<(Hierarchy, Vec<TestVectorSet>)> {
    cfg.validate()?;
    cparams.validate()?;
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    let vectors = generate_test_vectors(a, cfg.k, cfg.nu, spec, seed)?;
    build_hierarchy(a, spec, vectors, cfg, cparams)
}

/// Coarsest-grid eigenvectors of `A_c v = λ PᵀP v`, prolongated level by
/// level with `nu` homogeneous sweeps after each interpolation, normalized.
pub fn bootstrap_vectors(h: &Hierarchy, nu: usize, count: usize) -> Result<TestVectorSet> {
    if h.levels.len() < 2 {
        return Err(Error::TooFewLevels(h.levels.len()));
    }
    let p = h.composite_p()?;
    let ptp = p.transpose().matmul(&p)?;
    let ac = &h.levels.last().expect("nonempty").a;
    let k = count.min(ac.nrows());
    let (_, v) = dense_sym_generalized_eig(&ac.to_dense(), &ptp.to_dense(), k)?;
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let mut x = v.column(c);
        for lvl in h.levels[..h.levels.len() - 1].iter().rev() {
            x = lvl.p.as_ref().expect("interpolation").spmv(&x)?;
            let zero = vec![0.0; x.len()];
            for _ in 0..nu {
                lvl.smoother
                    .sweep(&lvl.a, &mut x, &zero, SweepDirection::Forward);
            }
        }
        normalize(&mut x);
        out.push(x);
    }
    Ok(TestVectorSet::new(out))
}

/// One bootstrap rebuild. The first `cfg.k` vectors of `vectors` (the random
/// test vectors of the previous setup) receive `nu` further sweeps and are
/// combined with the prolongated coarsest eigenvectors; the hierarchy is then
/// coarsened from scratch.
pub fn bootstrap_cycle(
    h: &Hierarchy,
    vectors: &TestVectorSet,
    cfg: &BootstrapConfig,
    cparams: &CoarseningParams,
) -> Result<(Hierarchy, Vec<TestVectorSet>)> {
    let fine = &h.levels[0];
    if vectors.dim() != fine.size() {
        return Err(Error::DimensionMismatch("bootstrap test vectors".into()));
    }
    let keep = cfg.k.min(vectors.len());
    let mut pool = TestVectorSet {
        vectors: vectors.vectors[..keep].to_vec(),
        weights: vectors.weights[..keep].to_vec(),
    };
    pool.smooth(
        &fine.a,
        &fine.smoother,
        fine.smoother_spec.direction,
        cfg.nu,
    );
    pool.extend(bootstrap_vectors(h, cfg.nu, cfg.n_eigenvectors)?);
    let (mut next, sets) = build_hierarchy(&fine.a, &fine.smoother_spec, pool, cfg, cparams)?;
    next.setup_cycles_used = h.setup_cycles_used + 1;
    Ok((next, sets))
}

/// Initial leg followed by `cfg.setup_cycles` bootstrap rebuilds. Cycles are
/// skipped once the hierarchy has a single level.
pub fn setup(
    a: &CsrMatrix,
    spec: &SmootherSpec,
    cfg: &BootstrapConfig,
    cparams: &CoarseningParams,
    seed: u64,
) -> Result<Hierarchy> {
    let (mut h, mut sets) = setup_initial(a, spec, cfg, cparams, seed)?;
    for _ in 0..cfg.setup_cycles {
        if h.levels.len() < 2 {
            break;
        }
        (h, sets) = bootstrap_cycle(&h, &sets[0], cfg, cparams)?;
    }
    Ok(h)
}

fn cycle_at(h: &Hierarchy, level: usize, b: &[f64], x: &mut [f64]) {
    let lvl = &h.levels[level];
    if level + 1 == h.levels.len() {
        match &h.coarsest_solver {
            CoarseSolver::Direct(chol) => x.copy_from_slice(&chol.solve(b)),
            CoarseSolver::Iterative(inner) => {
                let (sol, _) = pcg(&lvl.a, b, Some(inner), 1e-14, 500).expect("coarse solve");
                x.copy_from_slice(&sol);
            }
            CoarseSolver::SmoothOnly => {
                lvl.smoother.sweep(&lvl.a, x, b, SweepDirection::Forward);
                lvl.smoother.sweep(&lvl.a, x, b, SweepDirection::Backward);
            }
        }
        return;
    }
    let p = lvl.p.as_ref().expect("interpolation on non-coarsest level");
    lvl.smoother.sweep(&lvl.a, x, b, SweepDirection::Forward);
    let mut r = vec![0.0; x.len()];
    lvl.a.spmv_into(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let rc = p.spmv_transpose(&r).expect("dimensions");
    let mut ec = vec![0.0; rc.len()];
    cycle_at(h, level + 1, &rc, &mut ec);
    let e = p.spmv(&ec).expect("dimensions");
    x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
    lvl.smoother.sweep(&lvl.a, x, b, SweepDirection::Backward);
}

/// One V(1,1)-cycle on `A x = b` starting from `x`.
pub fn vcycle(h: &Hierarchy, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let n = h.levels[0].size();
    if b.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vcycle expects vectors of length {n}"
        )));
    }
    let mut out = x.to_vec();
    cycle_at(h, 0, b, &mut out);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn a_norm(a: &CsrMatrix, x: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    a.spmv_into(x, &mut y);
    dot(x, &y).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖r_k‖₂` for `k = 0..=iterations`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub setup_cycles_used: usize,
    pub level_sizes: Vec<usize>,
    pub coarsening_ratios: Vec<f64>,
    pub convergence_factor: Option<f64>,
}

impl SolveReport {
    pub fn relative_residual(&self) -> f64 {
        match (self.residual_history.first(), self.residual_history.last()) {
            (Some(&r0), Some(&r)) if r0 > 0.0 => r / r0,
            _ => 0.0,
        }
    }

    /// Key-value text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[String]| v.join(",");
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "converged={}", self.converged);
        let _ = writeln!(s, "relative_residual={:e}", self.relative_residual());
        let _ = writeln!(s, "setup_cycles_used={}", self.setup_cycles_used);
        let _ = writeln!(s, "levels={}", self.level_sizes.len());
        let sizes: Vec<String> = self.level_sizes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "level_sizes={}", join(&sizes));
        let ratios: Vec<String> = self
            .coarsening_ratios
            .iter()
            .map(|r| format!("{r:.6}"))
            .collect();
        let _ = writeln!(s, "coarsening_ratios={}", join(&ratios));
        match self.convergence_factor {
            Some(f) => {
                let _ = writeln!(s, "convergence_factor={f:.6}");
            }
            None => {
                let _ = writeln!(s, "convergence_factor=");
            }
        }
        s
    }

    pub fn residual_csv(&self) -> String {
        let mut s = String::from("iteration,residual\n");
        for (k, r) in self.residual_history.iter().enumerate() {
            let _ = writeln!(s, "{k},{r:e}");
        }
        s
    }
}

/// Conjugate gradients on `A x = b` from a zero initial guess, preconditioned
/// by one V-cycle of `h` when given. Stops once `‖r_k‖ ≤ tol ‖r_0‖`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    h: Option<&Hierarchy>,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch("pcg operands".into()));
    }
    if let Some(h) = h {
        if h.levels[0].size() != n {
            return Err(Error::DimensionMismatch("preconditioner size".into()));
        }
    }
    let precondition = |r: &[f64]| -> Vec<f64> {
        match h {
            Some(h) => {
                let mut z = vec![0.0; n];
                cycle_at(h, 0, r, &mut z);
                z
            }
            None => r.to_vec(),
        }
    };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = dot(&r, &r).sqrt();
    let mut history = vec![r0];
    let mut report = SolveReport {
        iterations: 0,
        residual_history: Vec::new(),
        converged: true,
        setup_cycles_used: h.map_or(0, |h| h.setup_cycles_used),
        level_sizes: h.map_or_else(|| vec![n], Hierarchy::sizes),
        coarsening_ratios: h.map_or_else(Vec::new, Hierarchy::coarsening_ratios),
        convergence_factor: None,
    };
    if r0 == 0.0 {
        report.residual_history = history;
        return Ok((x, report));
    }
    let mut z = precondition(&r);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::Indefinite(rz));
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut converged = false;
    let mut it = 0;
    while it < maxit {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Indefinite(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        let rn = dot(&r, &r).sqrt();
        history.push(rn);
        if rn <= tol * r0 {
            converged = true;
            break;
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::Indefinite(rz_new));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    report.iterations = it;
    report.residual_history = history;
    report.converged = converged;
    Ok((x, report))
}

/// Unpreconditioned conjugate gradients.
pub fn cg(a: &CsrMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    pcg(a, b, None, tol, maxit)
}

/// Power-iteration estimate of the asymptotic A-norm contraction of the
/// cycle `h` on `A e = 0`: geometric mean of the last five ratios
/// `‖e_{k+1}‖_A / ‖e_k‖_A` after `iters` cycles from a random start.
pub fn estimate_convergence_factor(h: &Hierarchy, iters: usize, seed: u64) -> Result<f64> {
    let a = &h.levels[0].a;
    let n = a.nrows();
    let iters = iters.max(5);
    let mut e = random_vectors(n, 1, seed).pop().expect("one vector");
    let zero = vec![0.0; n];
    let mut norm = a_norm(a, &e);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut logs = Vec::with_capacity(iters);
    for _ in 0..iters {
        e.iter_mut().for_each(|v| *v /= norm);
        cycle_at(h, 0, &zero, &mut e);
        norm = a_norm(a, &e);
        if norm == 0.0 {
            return Ok(0.0);
        }
        logs.push(norm.ln());
    }
    let tail = &logs[logs.len() - 5..];
    Ok((tail.iter().sum::<f64>() / 5.0).exp())
}

/// Asymptotic A-norm convergence factor of the two-grid method built from the
/// first two levels of `h`, or of the smoother alone for a single level
/// hierarchy without coarse solver.
pub fn estimate_two_grid_factor(h: &Hierarchy, iters: usize, seed: u64) -> Result<f64> {
    if h.levels.len() == 1 {
        return estimate_convergence_factor(h, iters, seed);
    }
    estimate_convergence_factor(&h.two_grid()?, iters, seed)
}
