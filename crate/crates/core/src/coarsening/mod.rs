//! Least angle regression coarsening.
//!
//! Every variable is fitted by a kernel-localized lasso path against the
//! test vectors. The penalized coefficients define a strength graph whose
//! importance-ordered independent set seeds the coarse grid. Fine rows are
//! then refitted from coarse candidates only, unused coarse variables are
//! demoted, and maximal volume swaps remove interpolation weights above 1.

mod maxvol;
mod strength;

use rayon::prelude::*;

pub use maxvol::MaxvolReport;
pub use strength::{independent_set, strength_graph, StrengthGraph};

use crate::error::{Error, Result};
use crate::lars::{build_local_problem, fit_local, LarsOptions, LocalFit};
use crate::smoother::TestVectorSet;
use crate::sparse::{Adjacency, CsrMatrix, Neighborhood};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    NearestNeighbor,
    #[default]
    TriCube,
}

/// Distance-based localization of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Radius in graph edges; the kernel vanishes at and beyond it.
    pub radius: usize,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            kind: KernelKind::TriCube,
            radius: 4,
        }
    }
}

/// Kernel value at graph distance `d`.
pub fn kernel_weight(spec: &KernelSpec, d: usize) -> f64 {
    if d >= spec.radius {
        return 0.0;
    }
    match spec.kind {
        KernelKind::NearestNeighbor => 1.0,
        KernelKind::TriCube => {
            let t = d as f64 / spec.radius as f64;
            (1.0 - t * t * t).powi(3)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightsMode {
    /// `ω_k = 1` for every test vector.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseningParams {
    pub kernel: KernelSpec,
    pub lars: LarsOptions,
    /// Relative strength threshold θ.
    pub strength_threshold: f64,
    /// Outer refit / demotion / maximal volume passes.
    pub maxvol_iterations: usize,
    pub weights_mode: WeightsMode,
}

impl Default for CoarseningParams {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            lars: LarsOptions::default(),
            strength_threshold: 1e-2,
            maxvol_iterations: 4,
            weights_mode: WeightsMode::Uniform,
        }
    }
}

impl CoarseningParams {
    pub fn validate(&self) -> Result<()> {
        self.lars.validate()?;
        if self.kernel.radius == 0 {
            return Err(Error::InvalidArgument(
                "kernel radius must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.strength_threshold) {
            return Err(Error::InvalidArgument(
                "strength threshold must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Result of fitting one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableFit {
    Fitted(LocalFit),
    /// No admissible candidate inside the kernel support.
    Isolated,
    /// Not fitted because the variable is coarse.
    Coarse,
}

impl VariableFit {
    pub fn fit(&self) -> Option<&LocalFit> {
        match self {
            VariableFit::Fitted(f) => Some(f),
            _ => None,
        }
    }
}

/// Kernel neighborhoods of every variable, computed once per level.
#[derive(Debug, Clone)]
pub struct LocalSupports {
    pub neighborhoods: Vec<Neighborhood>,
}

impl LocalSupports {
    pub fn new(a: &CsrMatrix, kernel: &KernelSpec) -> Result<Self> {
        let adj = Adjacency::from_matrix(a);
        // members at distance η carry zero kernel weight
        let radius = kernel.radius.saturating_sub(1).max(1);
        let neighborhoods = (0..adj.len())
            .into_par_iter()
            .map(|i| adj.ball(i, radius))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { neighborhoods })
    }
}

fn fit_one(
    i: usize,
    supports: &LocalSupports,
    vectors: &TestVectorSet,
    params: &CoarseningParams,
    restrict_to: Option<&[bool]>,
) -> Result<VariableFit> {
    let prob = match build_local_problem(
        i,
        vectors,
        &supports.neighborhoods[i],
        &params.kernel,
        restrict_to,
    ) {
        Ok(p) => p,
        Err(Error::IsolatedVariable(_)) => return Ok(VariableFit::Isolated),
        Err(e) => return Err(e),
    };
    match fit_local(&prob, &params.lars) {
        Ok((_, fit)) => Ok(VariableFit::Fitted(fit)),
        Err(Error::EmptyPath) => Ok(VariableFit::Isolated),
        Err(e) => Err(e),
    }
}

fn fit_rows(
    rows: &[usize],
    supports: &LocalSupports,
    vectors: &TestVectorSet,
    params: &CoarseningParams,
    restrict_to: Option<&[bool]>,
) -> Result<Vec<VariableFit>> {
    rows.par_iter()
        .map(|&i| fit_one(i, supports, vectors, params, restrict_to))
        .collect()
}

/// Fits every eligible variable: all of them, or, with `restrict_to`, the
/// variables outside the mask using candidates inside it.
pub fn fit_all(
    a: &CsrMatrix,
    vectors: &TestVectorSet,
    params: &CoarseningParams,
    restrict_to: Option<&[bool]>,
) -> Result<Vec<VariableFit>> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("no test vectors".into()));
    }
    if vectors.dim() != a.nrows() {
        return Err(Error::DimensionMismatch("test vectors vs matrix".into()));
    }
    let supports = LocalSupports::new(a, &params.kernel)?;
    fit_all_with(&supports, vectors, params, restrict_to)
}

fn fit_all_with(
    supports: &LocalSupports,
    vectors: &TestVectorSet,
    params: &CoarseningParams,
    restrict_to: Option<&[bool]>,
) -> Result<Vec<VariableFit>> {
    let n = supports.neighborhoods.len();
    let rows: Vec<usize> = match restrict_to {
        Some(mask) => (0..n).filter(|&i| !mask[i]).collect(),
        None => (0..n).collect(),
    };
    let fitted = fit_rows(&rows, supports, vectors, params, restrict_to)?;
    let mut out = vec![VariableFit::Coarse; n];
    for (i, f) in rows.into_iter().zip(fitted) {
        out[i] = f;
    }
    Ok(out)
}

/// Coarse/fine split with interpolation rows of the fine variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    /// Coarse variables, ascending; the position is the coarse index.
    pub coarse: Vec<usize>,
    /// Coarse index of each variable, `None` for fine ones.
    pub coarse_index: Vec<Option<usize>>,
    /// `(C_i, p_i)` for fine variables, `None` for coarse ones.
    pub rows: Vec<Option<(Vec<usize>, Vec<f64>)>>,
}

impl Interpolation {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.coarse.len()
    }

    pub fn coarsening_ratio(&self) -> f64 {
        self.n_coarse() as f64 / self.n().max(1) as f64
    }

    pub fn is_coarse(&self, i: usize) -> bool {
        self.coarse_index[i].is_some()
    }

    /// Mean `|C_i|` over fine variables.
    pub fn mean_caliber(&self) -> f64 {
        let (s, c) = self
            .rows
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(s, c), (cols, _)| {
                (s + cols.len(), c + 1)
            });
        if c == 0 {
            0.0
        } else {
            s as f64 / c as f64
        }
    }

    /// Largest interpolation weight magnitude over fine rows.
    pub fn max_weight(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .flat_map(|(_, w)| w.iter())
            .fold(0.0f64, |m, w| m.max(w.abs()))
    }

    /// Checks that every fine row is nonempty and interpolates from coarse
    /// variables only.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            match (row, self.coarse_index[i]) {
                (None, Some(_)) => {}
                (Some((cols, w)), None) => {
                    if cols.is_empty() || cols.len() != w.len() {
                        return Err(Error::EmptyInterpolation(i));
                    }
                    if let Some(&j) = cols.iter().find(|&&j| self.coarse_index[j].is_none()) {
                        return Err(Error::InvalidArgument(format!(
                            "fine variable {i} interpolates from fine variable {j}"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "variable {i} has inconsistent coarse/fine state"
                    )))
                }
            }
        }
        Ok(())
    }

    fn from_state(is_coarse: &[bool], fits: &[VariableFit]) -> Self {
        let n = is_coarse.len();
        let coarse: Vec<usize> = (0..n).filter(|&i| is_coarse[i]).collect();
        let mut coarse_index = vec![None; n];
        for (k, &c) in coarse.iter().enumerate() {
            coarse_index[c] = Some(k);
        }
        let rows = (0..n)
            .map(|i| {
                if is_coarse[i] {
                    None
                } else {
                    fits[i]
                        .fit()
                        .map(|f| (f.selected.clone(), f.p_unpenalized.clone()))
                        .or(Some((Vec::new(), Vec::new())))
                }
            })
            .collect();
        Self {
            coarse,
            coarse_index,
            rows,
        }
    }
}

/// `n × n_c` interpolation matrix: identity rows for coarse variables, fitted
/// weights for fine ones.
pub fn build_p(interp: &Interpolation) -> Result<CsrMatrix> {
    let rows = interp
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| match (interp.coarse_index[i], row) {
            (Some(c), _) => Ok(vec![(c, 1.0)]),
            (None, Some((cols, w))) if !cols.is_empty() => {
                let mut r: Vec<(usize, f64)> = cols
                    .iter()
                    .zip(w)
                    .map(|(&j, &p)| {
                        interp.coarse_index[j]
                            .map(|c| (c, p))
                            .ok_or(Error::EmptyInterpolation(i))
                    })
                    .collect::<Result<_>>()?;
                r.sort_by_key(|&(c, _)| c);
                Ok(r)
            }
            _ => Err(Error::EmptyInterpolation(i)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CsrMatrix::from_sorted_rows(interp.n_coarse(), rows))
}

/// Mutable coarse/fine state shared by the outer loop and the maximal volume
/// correction.
pub(crate) struct CoarseningState<'a> {
    supports: &'a LocalSupports,
    vectors: &'a TestVectorSet,
    params: &'a CoarseningParams,
    pub is_coarse: Vec<bool>,
    pub fits: Vec<VariableFit>,
}

impl CoarseningState<'_> {
    /// Refits the given fine rows from the current coarse set. Rows left
    /// without candidates become coarse.
    pub fn refit(&mut self, rows: &[usize]) -> Result<usize> {
        let rows: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| !self.is_coarse[i])
            .collect();
        let fitted = fit_rows(
            &rows,
            self.supports,
            self.vectors,
            self.params,
            Some(&self.is_coarse),
        )?;
        let mut forced = 0;
        for (i, f) in rows.into_iter().zip(fitted) {
            if matches!(f, VariableFit::Isolated) {
                self.is_coarse[i] = true;
                self.fits[i] = VariableFit::Coarse;
                forced += 1;
            } else {
                self.fits[i] = f;
            }
        }
        Ok(forced)
    }

    fn refit_all_fine(&mut self) -> Result<usize> {
        let rows: Vec<usize> = (0..self.is_coarse.len()).collect();
        self.refit(&rows)
    }

    /// Moves coarse variables no fine row interpolates from to the fine set,
    /// in ascending order, fitting each demoted row right away.
    fn demote_unused(&mut self) -> Result<usize> {
        let n = self.is_coarse.len();
        let mut used = vec![false; n];
        for f in &self.fits {
            if let VariableFit::Fitted(fit) = f {
                for &j in &fit.selected {
                    used[j] = true;
                }
            }
        }
        let mut demoted = 0;
        for j in 0..n {
            if !self.is_coarse[j] || used[j] {
                continue;
            }
            self.is_coarse[j] = false;
            let f = fit_one(
                j,
                self.supports,
                self.vectors,
                self.params,
                Some(&self.is_coarse),
            )?;
            match f {
                VariableFit::Fitted(fit) => {
                    for &c in &fit.selected {
                        used[c] = true;
                    }
                    self.fits[j] = VariableFit::Fitted(fit);
                    demoted += 1;
                }
                _ => self.is_coarse[j] = true,
            }
        }
        Ok(demoted)
    }

    fn interpolation(&self) -> Interpolation {
        Interpolation::from_state(&self.is_coarse, &self.fits)
    }
}

/// Maximal volume correction of an existing interpolation: swaps the fine
/// variable `k` and the coarse variable `ℓ` of the largest `|p_kℓ| > 1` until
/// none remains or `budget` swaps were made, refitting the affected rows.
pub fn maxvol_correction(
    interp: &Interpolation,
    a: &CsrMatrix,
    vectors: &TestVectorSet,
    params: &CoarseningParams,
    budget: usize,
) -> Result<(Interpolation, MaxvolReport)> {
    let supports = LocalSupports::new(a, &params.kernel)?;
    let is_coarse: Vec<bool> = (0..interp.n()).map(|i| interp.is_coarse(i)).collect();
    let fits = interp
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Some((cols, w)) => VariableFit::Fitted(LocalFit {
                center: i,
                selected: cols.clone(),
                p_penalized: w.clone(),
                p_unpenalized: w.clone(),
                step: 0,
            }),
            None => VariableFit::Coarse,
        })
        .collect();
    let mut state = CoarseningState {
        supports: &supports,
        vectors,
        params,
        is_coarse,
        fits,
    };
    let report = maxvol::maxvol_pass(&mut state, budget)?;
    Ok((state.interpolation(), report))
}

/// Bookkeeping of one coarsening run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseningReport {
    /// Unrestricted fits that fed the strength graph.
    pub initial_fits: Vec<VariableFit>,
    pub strength: StrengthGraph,
    /// Size of the independent set before refinement.
    pub initial_coarse: usize,
    /// Maximal volume swaps of each outer pass.
    pub swaps: Vec<usize>,
    /// Demotions of each outer pass.
    pub demotions: Vec<usize>,
    /// Variables forced coarse for lack of candidates.
    pub forced_coarse: usize,
    /// Whether the last maximal volume pass ended with all `|p_ij| ≤ 1`.
    pub maxvol_converged: bool,
    pub outer_iterations: usize,
}

impl CoarseningReport {
    pub fn total_swaps(&self) -> usize {
        self.swaps.iter().sum()
    }
}

/// Full coarsening pipeline returning the coarse set with its least squares
/// interpolation.
pub fn lar_coarsening(
    a: &CsrMatrix,
    vectors: &TestVectorSet,
    params: &CoarseningParams,
) -> Result<(Interpolation, CoarseningReport)> {
    params.validate()?;
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("no test vectors".into()));
    }
    let n = a.nrows();
    if vectors.dim() != n {
        return Err(Error::DimensionMismatch("test vectors vs matrix".into()));
    }
    let supports = LocalSupports::new(a, &params.kernel)?;
    let initial_fits = fit_all_with(&supports, vectors, params, None)?;
    let strength = strength_graph(&initial_fits, params.strength_threshold);
    let is_coarse = independent_set(&strength, n);
    let initial_coarse = is_coarse.iter().filter(|&&c| c).count();

    let mut state = CoarseningState {
        supports: &supports,
        vectors,
        params,
        is_coarse,
        fits: vec![VariableFit::Coarse; n],
    };
    let mut report = CoarseningReport {
        initial_fits,
        strength,
        initial_coarse,
        swaps: Vec::new(),
        demotions: Vec::new(),
        forced_coarse: 0,
        maxvol_converged: true,
        outer_iterations: 0,
    };

    report.forced_coarse += state.refit_all_fine()?;
    for pass in 0..params.maxvol_iterations {
        if pass > 0 {
            report.forced_coarse += state.refit_all_fine()?;
        }
        let demoted = state.demote_unused()?;
        let mv = maxvol::maxvol_pass(&mut state, n)?;
        report.demotions.push(demoted);
        report.swaps.push(mv.swaps);
        report.maxvol_converged = !mv.budget_exhausted;
        report.outer_iterations = pass + 1;
        if demoted == 0 && mv.swaps == 0 {
            break;
        }
    }
    if params.maxvol_iterations == 0 {
        report.maxvol_converged = maxvol::largest_weight(&state).is_none_or(|(_, _, p)| p <= 1.0);
    }
    let interp = state.interpolation();
    interp.validate()?;
    Ok((interp, report))
}
