//! Least angle regression with lasso drop/rewind semantics.
//!
//! A [`RegressionProblem`] is the kernel-weighted local fit of one variable
//! against the test-vector observations of its neighbors. [`lars_path`]
//! traces the lasso path from zero up to the least squares fit (or a stopping
//! criterion), [`lars_path_signed`] the sign-constrained variant, and
//! [`select_fit`] picks the coefficients at a prescribed active-set size.

use std::fmt::Write as _;

use crate::coarsening::{kernel_weight, KernelSpec};
use crate::dense::{solve_dense_lsq, DenseMatrix};
use crate::error::{Error, Result};
use crate::smoother::TestVectorSet;
use crate::sparse::Neighborhood;

/// Step sizes at or below this are treated as zero.
const STEP_EPS: f64 = 1e-14;

/// Columns whose raw norm falls below this are dropped.
const ZERO_COLUMN: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    /// Variable being fitted.
    pub center: usize,
    /// `√ω_k · v_i^(k)` for each test vector `k`.
    pub target: Vec<f64>,
    /// `K × m`; column `j` is the unit-normalized weighted observation of
    /// `column_ids[j]` times its kernel weight.
    pub design: DenseMatrix,
    pub column_ids: Vec<usize>,
    /// Norm of the weighted observations before normalization.
    pub raw_norms: Vec<f64>,
    pub kernel_weights: Vec<f64>,
    /// Candidates discarded because their observations vanish.
    pub dropped_zero_columns: Vec<usize>,
}

impl RegressionProblem {
    pub fn num_columns(&self) -> usize {
        self.column_ids.len()
    }

    /// Converts a design-space coefficient of column `j` to an interpolation
    /// weight acting on the raw observations.
    pub fn weight(&self, j: usize, coefficient: f64) -> f64 {
        coefficient * self.kernel_weights[j] / self.raw_norms[j]
    }
}

/// Builds the local regression problem for `i`.
///
/// `restrict_to`, when given, is a membership mask over all variables: only
/// neighbors inside it become columns.
pub fn build_local_problem(
    i: usize,
    vectors: &TestVectorSet,
    nbhd: &Neighborhood,
    kernel: &KernelSpec,
    restrict_to: Option<&[bool]>,
) -> Result<RegressionProblem> {
    if nbhd.center != i {
        return Err(Error::InvalidArgument(format!(
            "neighborhood is centered at {}, not {i}",
            nbhd.center
        )));
    }
    let k = vectors.len();
    let sqrt_w: Vec<f64> = vectors.weights.iter().map(|w| w.sqrt()).collect();
    let target: Vec<f64> = (0..k).map(|r| sqrt_w[r] * vectors.vectors[r][i]).collect();

    let mut columns = Vec::new();
    let mut column_ids = Vec::new();
    let mut raw_norms = Vec::new();
    let mut kernel_weights = Vec::new();
    let mut dropped_zero_columns = Vec::new();
    for &(j, d) in &nbhd.members {
        if j == i {
            continue;
        }
        let kw = kernel_weight(kernel, d);
        if kw <= 0.0 {
            continue;
        }
        if let Some(mask) = restrict_to {
            if !mask[j] {
                continue;
            }
        }
        let mut col: Vec<f64> = (0..k).map(|r| sqrt_w[r] * vectors.vectors[r][j]).collect();
        let nrm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm < ZERO_COLUMN {
            dropped_zero_columns.push(j);
            continue;
        }
        col.iter_mut().for_each(|x| *x *= kw / nrm);
        columns.push(col);
        column_ids.push(j);
        raw_norms.push(nrm);
        kernel_weights.push(kw);
    }
    if columns.is_empty() {
        return Err(Error::IsolatedVariable(i));
    }
    let mut design = DenseMatrix::zeros(k, columns.len());
    for (c, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            design.set(r, c, v);
        }
    }
    Ok(RegressionProblem {
        center: i,
        target,
        design,
        column_ids,
        raw_norms,
        kernel_weights,
        dropped_zero_columns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarsOptions {
    /// Stop once the largest inactive correlation drops below this fraction
    /// of the initial largest correlation.
    pub correlation_threshold: f64,
    /// Target active-set size.
    pub caliber: usize,
    /// Stop when the active set reaches `⌈max_active_factor · caliber⌉`.
    pub max_active_factor: f64,
    pub sign_constrained: bool,
    /// Prescribed column signs; the signs of the initial correlations are used
    /// when absent.
    pub signs: Option<Vec<f64>>,
}

impl Default for LarsOptions {
    fn default() -> Self {
        Self {
            correlation_threshold: 1e-2,
            caliber: 3,
            max_active_factor: 2.0,
            sign_constrained: false,
            signs: None,
        }
    }
}

impl LarsOptions {
    /// No stopping criterion besides the natural end of the path.
    pub fn full_path() -> Self {
        Self {
            correlation_threshold: 0.0,
            caliber: usize::MAX / 4,
            max_active_factor: 1.0,
            sign_constrained: false,
            signs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.caliber == 0 {
            return Err(Error::InvalidArgument("caliber must be at least 1".into()));
        }
        if !(self.max_active_factor >= 1.0) {
            return Err(Error::InvalidArgument(
                "max_active_factor must be at least 1".into(),
            ));
        }
        if !(self.correlation_threshold >= 0.0) {
            return Err(Error::InvalidArgument(
                "correlation threshold must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn active_limit(&self) -> usize {
        let lim = (self.max_active_factor * self.caliber as f64).ceil();
        if lim >= usize::MAX as f64 {
            usize::MAX
        } else {
            lim as usize
        }
    }
}

/// What ended a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LarsEvent {
    /// The column tied in correlation and enters the active set next.
    Added(usize),
    /// The coefficient of the column reached zero and left the active set.
    Dropped(usize),
    /// Full least squares step on the active set.
    Finished,
}

/// Path state after one update. Indices are design columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LarsStep {
    /// Active columns in order of entry.
    pub active: Vec<usize>,
    /// Penalized coefficients; zero outside `active`.
    pub x: Vec<f64>,
    /// Least squares coefficients restricted to `active`.
    pub x_unpenalized: Vec<f64>,
    /// Correlations `Wᵀ r` with the residual after the update.
    pub rho: Vec<f64>,
    pub alpha: f64,
    pub event: LarsEvent,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LarsPath {
    pub steps: Vec<LarsStep>,
    /// Largest absolute initial correlation.
    pub initial_correlation: f64,
    /// Column signs used by the sign-constrained variant.
    pub signs: Option<Vec<f64>>,
}

impl LarsPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Accumulated `ℓ₁` change of the penalized coefficients after each step.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut prev = self
            .steps
            .first()
            .map(|s| vec![0.0; s.x.len()])
            .unwrap_or_default();
        let mut acc = 0.0;
        self.steps
            .iter()
            .map(|s| {
                acc +=
                    s.x.iter()
                        .zip(&prev)
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>();
                prev.clone_from(&s.x);
                acc
            })
            .collect()
    }
}

fn residual(w: &DenseMatrix, v: &[f64], x: &[f64]) -> Vec<f64> {
    let wx = w.matvec(x).expect("coefficient length matches design");
    v.iter().zip(wx).map(|(a, b)| a - b).collect()
}

fn correlations(w: &DenseMatrix, r: &[f64]) -> Vec<f64> {
    let (k, m) = (w.nrows(), w.ncols());
    let mut rho = vec![0.0; m];
    for row in 0..k {
        let rv = r[row];
        for (j, out) in rho.iter_mut().enumerate() {
            *out += w.get(row, j) * rv;
        }
    }
    rho
}

fn restricted_lsq(w: &DenseMatrix, active: &[usize], r: &[f64]) -> Vec<f64> {
    let mut sub = DenseMatrix::zeros(w.nrows(), active.len());
    for row in 0..w.nrows() {
        for (c, &j) in active.iter().enumerate() {
            sub.set(row, c, w.get(row, j));
        }
    }
    solve_dense_lsq(&sub, r).expect("shapes agree").x
}

/// Path loop shared by both variants. With `signed` the design is assumed to
/// be pre-scaled so that admissible coefficients are nonnegative.
fn trace(w: &DenseMatrix, v: &[f64], opts: &LarsOptions, signed: bool) -> (Vec<LarsStep>, f64) {
    let (k, m) = (w.nrows(), w.ncols());
    let natural_limit = k.min(m);
    let active_limit = opts.active_limit();
    let step_cap = 3 * natural_limit + 8;

    let rho0 = correlations(w, v);
    let c0 = if signed {
        rho0.iter().fold(0.0f64, |a, &b| a.max(b))
    } else {
        rho0.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    };
    let mut steps = Vec::new();
    if c0 == 0.0 {
        return (steps, c0);
    }

    let mut x = vec![0.0; m];
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; m];
    let mut rewind = false;
    let mut just_dropped: Option<usize> = None;

    while steps.len() < step_cap {
        let r = residual(w, v, &x);
        let rho = correlations(w, &r);

        let mut entering = None;
        if rewind {
            rewind = false;
        } else {
            // lowest index wins ties
            let mut best: Option<(usize, f64)> = None;
            for j in (0..m).filter(|&j| !is_active[j]) {
                let c = if signed { rho[j] } else { rho[j].abs() };
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((j, c));
                }
            }
            let Some((jhat, cmax)) = best else { break };
            if (signed && cmax <= 0.0) || cmax < opts.correlation_threshold * c0 {
                break;
            }
            active.push(jhat);
            is_active[jhat] = true;
            entering = Some(jhat);
        }

        let d = restricted_lsq(w, &active, &r);
        let mut dfull = vec![0.0; m];
        for (c, &j) in active.iter().enumerate() {
            dfull[j] = d[c];
        }

        let mut alpha_drop = f64::INFINITY;
        let mut drop_col = usize::MAX;
        for (c, &i) in active.iter().enumerate() {
            if Some(i) == entering || d[c] == 0.0 {
                continue;
            }
            let a = -x[i] / d[c];
            if a > STEP_EPS && (a < alpha_drop || (a == alpha_drop && i < drop_col)) {
                alpha_drop = a;
                drop_col = i;
            }
        }

        let common = active.iter().fold(0.0f64, |acc, &i| acc.max(rho[i].abs()));
        let mu = correlations(w, &w.matvec(&dfull).expect("length m"));
        let mut alpha_join = f64::INFINITY;
        let mut join_col = usize::MAX;
        for j in (0..m).filter(|&j| !is_active[j]) {
            // the column just dropped sits exactly on one of its crossing
            // lines; that root is the current point, not a new crossing
            let skip_plus = just_dropped == Some(j) && rho[j] >= 0.0;
            let skip_minus = just_dropped == Some(j) && rho[j] < 0.0;
            let mut consider = |num: f64, den: f64| {
                if den != 0.0 {
                    let a = num / den;
                    if a.is_finite()
                        && a > STEP_EPS
                        && (a < alpha_join || (a == alpha_join && j < join_col))
                    {
                        alpha_join = a;
                        join_col = j;
                    }
                }
            };
            if !skip_plus {
                consider(common - rho[j], common - mu[j]);
            }
            if !signed && !skip_minus {
                consider(common + rho[j], common + mu[j]);
            }
        }

        let x_prev = x.clone();
        let dropping = alpha_drop < alpha_join && alpha_drop < 1.0;
        let alpha = if dropping {
            alpha_drop
        } else {
            alpha_join.min(1.0)
        };
        for (c, &i) in active.iter().enumerate() {
            x[i] += alpha * d[c];
        }

        let event;
        let mut x_unpenalized = vec![0.0; m];
        if dropping {
            x[drop_col] = 0.0;
            active.retain(|&i| i != drop_col);
            is_active[drop_col] = false;
            rewind = true;
            just_dropped = Some(drop_col);
            event = LarsEvent::Dropped(drop_col);
            let r_new = residual(w, v, &x);
            let d_new = restricted_lsq(w, &active, &r_new);
            for (c, &i) in active.iter().enumerate() {
                x_unpenalized[i] = x[i] + d_new[c];
            }
        } else {
            just_dropped = None;
            for (c, &i) in active.iter().enumerate() {
                x_unpenalized[i] = x_prev[i] + d[c];
            }
            event = if alpha >= 1.0 {
                LarsEvent::Finished
            } else {
                LarsEvent::Added(join_col)
            };
        }

        if signed {
            // admissible coefficients are nonnegative in the scaled design
            for xi in x.iter_mut() {
                if *xi < 0.0 {
                    *xi = 0.0;
                }
            }
        }

        let rho_after = correlations(w, &residual(w, v, &x));
        steps.push(LarsStep {
            active: active.clone(),
            x: x.clone(),
            x_unpenalized,
            rho: rho_after,
            alpha,
            event,
        });

        if event == LarsEvent::Finished
            || active.len() >= active_limit
            || (!dropping && active.len() >= natural_limit)
        {
            break;
        }
    }
    (steps, c0)
}

/// Lasso path by least angle regression.
fn check_shapes(prob: &RegressionProblem) -> Result<()> {
    if prob.num_columns() == 0 {
        return Err(Error::IsolatedVariable(prob.center));
    }
    if prob.design.nrows() != prob.target.len() || prob.design.ncols() != prob.column_ids.len() {
        return Err(Error::DimensionMismatch(
            "design vs target or column ids".into(),
        ));
    }
    Ok(())
}

pub fn lars_path(prob: &RegressionProblem, opts: &LarsOptions) -> Result<LarsPath> {
    opts.validate()?;
    check_shapes(prob)?;
    let (steps, c0) = trace(&prob.design, &prob.target, opts, false);
    Ok(LarsPath {
        steps,
        initial_correlation: c0,
        signs: None,
    })
}

/// Sign-constrained lasso path: every penalized coefficient keeps the sign of
/// its initial correlation (or the prescribed sign).
pub fn lars_path_signed(prob: &RegressionProblem, opts: &LarsOptions) -> Result<LarsPath> {
    opts.validate()?;
    check_shapes(prob)?;
    let m = prob.num_columns();
    let signs: Vec<f64> = match &opts.signs {
        Some(s) if s.len() == m => s
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect(),
        Some(s) => {
            return Err(Error::DimensionMismatch(format!(
                "{} signs for {m} columns",
                s.len()
            )))
        }
        None => correlations(&prob.design, &prob.target)
            .iter()
            .map(|&r| if r < 0.0 { -1.0 } else { 1.0 })
            .collect(),
    };
    let mut scaled = prob.design.clone();
    for r in 0..scaled.nrows() {
        for (j, &s) in signs.iter().enumerate() {
            scaled.set(r, j, s * scaled.get(r, j));
        }
    }
    let (mut steps, c0) = trace(&scaled, &prob.target, opts, true);
    for st in &mut steps {
        for (j, &s) in signs.iter().enumerate() {
            st.x[j] *= s;
            st.x_unpenalized[j] *= s;
            st.rho[j] *= s;
        }
    }
    Ok(LarsPath {
        steps,
        initial_correlation: c0,
        signs: Some(signs),
    })
}

/// Coefficients picked from a path, already converted to interpolation
/// weights on the raw observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub center: usize,
    /// Selected variables, ascending.
    pub selected: Vec<usize>,
    pub p_penalized: Vec<f64>,
    pub p_unpenalized: Vec<f64>,
    /// Index of the chosen step in the path.
    pub step: usize,
}

impl LocalFit {
    pub fn caliber(&self) -> usize {
        self.selected.len()
    }
}

/// Index of the step to use: the last one whose active set has exactly
/// `caliber` members, otherwise the last one with the largest active set
/// below `caliber`.
pub fn select_step(path: &LarsPath, caliber: usize) -> Result<usize> {
    if let Some(s) = path.steps.iter().rposition(|s| s.active.len() == caliber) {
        return Ok(s);
    }
    let best = path
        .steps
        .iter()
        .map(|s| s.active.len())
        .filter(|&l| l > 0 && l < caliber)
        .max()
        .ok_or(Error::EmptyPath)?;
    Ok(path
        .steps
        .iter()
        .rposition(|s| s.active.len() == best)
        .expect("size was observed"))
}

pub fn select_fit(
    prob: &RegressionProblem,
    path: &LarsPath,
    opts: &LarsOptions,
) -> Result<LocalFit> {
    let idx = select_step(path, opts.caliber)?;
    let step = &path.steps[idx];
    let mut cols = step.active.clone();
    cols.sort_by_key(|&c| prob.column_ids[c]);
    Ok(LocalFit {
        center: prob.center,
        selected: cols.iter().map(|&c| prob.column_ids[c]).collect(),
        p_penalized: cols.iter().map(|&c| prob.weight(c, step.x[c])).collect(),
        p_unpenalized: cols
            .iter()
            .map(|&c| prob.weight(c, step.x_unpenalized[c]))
            .collect(),
        step: idx,
    })
}

/// Solves the path for `prob` with the variant requested by `opts` and
/// selects the fit.
pub fn fit_local(prob: &RegressionProblem, opts: &LarsOptions) -> Result<(LarsPath, LocalFit)> {
    let path = if opts.sign_constrained {
        lars_path_signed(prob, opts)?
    } else {
        lars_path(prob, opts)?
    };
    let fit = select_fit(prob, &path, opts)?;
    Ok((path, fit))
}

/// CSV trace, one row per step: `step,event,variable,l1_arclength,
/// active_count`, then penalized coefficient, unpenalized coefficient and
/// correlation per column. Steps are numbered from 1.
pub fn path_to_csv(prob: &RegressionProblem, path: &LarsPath) -> String {
    let mut s = String::from("step,event,variable,l1_arclength,active_count");
    for &id in &prob.column_ids {
        let _ = write!(s, ",x_{id}");
    }
    for &id in &prob.column_ids {
        let _ = write!(s, ",xu_{id}");
    }
    for &id in &prob.column_ids {
        let _ = write!(s, ",rho_{id}");
    }
    s.push('\n');
    for (k, (st, arc)) in path.steps.iter().zip(path.arc_lengths()).enumerate() {
        let (ev, var) = match st.event {
            LarsEvent::Added(j) => ("added", prob.column_ids[j].to_string()),
            LarsEvent::Dropped(j) => ("dropped", prob.column_ids[j].to_string()),
            LarsEvent::Finished => ("finished", String::new()),
        };
        let _ = write!(s, "{},{ev},{var},{arc:e},{}", k + 1, st.active.len());
        for vals in [&st.x, &st.x_unpenalized, &st.rho] {
            for v in vals.iter() {
                let _ = write!(s, ",{v:e}");
            }
        }
        s.push('\n');
    }
    s
}
