//! Problem construction and the end-to-end runs behind the command line
//! verbs. Every CSV or report produced here starts with the resolved
//! configuration as `#` comment lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::coarsening::{lar_coarsening, VariableFit};
use crate::config::{ProblemSource, RunConfig, SmootherChoice};
use crate::error::{Error, Result};
use crate::fem::{
    assemble, coefficients_from_angle, disc_mesh_with_sectors, load_vector, DiffusionCoefficients,
    Mesh,
};
use crate::lars::{build_local_problem, lars_path, lars_path_signed, path_to_csv, LarsPath};
use crate::mm::read_matrix_market;
use crate::multilevel::{cg, estimate_two_grid_factor, pcg, setup, Hierarchy, SolveReport};
use crate::smoother::{build_blocks, generate_test_vectors, random_vectors, SmootherSpec};
use crate::sparse::{graph_neighborhood, CsrMatrix};

/// Seed offset for the right-hand side of loaded matrices.
const RHS_SEED_SALT: u64 = 0x5EED_0F0B;

#[derive(Debug, Clone)]
pub struct Problem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub mesh: Option<Mesh>,
    /// Coordinates of each unknown, for generated problems.
    pub coords: Option<Vec<[f64; 2]>>,
}

pub fn diffusion(cfg: &RunConfig) -> Result<DiffusionCoefficients> {
    if cfg.anisotropy.epsilon == 1.0 {
        return Ok(DiffusionCoefficients::ISOTROPIC);
    }
    coefficients_from_angle(cfg.anisotropy)
}

pub fn mesh_for(cfg: &RunConfig) -> Result<Mesh> {
    match cfg.problem {
        ProblemSource::Disc { levels, sectors } => Ok(disc_mesh_with_sectors(sectors, levels)),
        ProblemSource::MatrixMarket(_) => Err(Error::InvalidArgument(
            "the problem is a loaded matrix, not a mesh".into(),
        )),
    }
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    match &cfg.problem {
        ProblemSource::Disc { .. } => {
            let mesh = mesh_for(cfg)?;
            let (a, interior) = assemble(&mesh, &diffusion(cfg)?)?;
            let b = load_vector(&mesh, &interior);
            let coords = interior.iter().map(|&v| mesh.vertices[v]).collect();
            Ok(Problem {
                a,
                b,
                mesh: Some(mesh),
                coords: Some(coords),
            })
        }
        ProblemSource::MatrixMarket(path) => {
            let a = read_matrix_market(path)?;
            if a.nrows() != a.ncols() {
                return Err(Error::DimensionMismatch("matrix must be square".into()));
            }
            let b = random_vectors(a.nrows(), 1, cfg.seed ^ RHS_SEED_SALT)
                .pop()
                .expect("one vector");
            Ok(Problem {
                a,
                b,
                mesh: None,
                coords: None,
            })
        }
    }
}

pub fn smoother_spec(cfg: &RunConfig, a: &CsrMatrix) -> Result<SmootherSpec> {
    Ok(match cfg.smoother {
        SmootherChoice::GaussSeidel => SmootherSpec::gauss_seidel(),
        SmootherChoice::BlockGaussSeidel(nb) => {
            SmootherSpec::block_gauss_seidel(build_blocks(a, nb)?)
        }
    })
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub hierarchy: Hierarchy,
}

/// Setup, optional two-grid estimate and preconditioned CG for `problem`.
pub fn solve_problem(cfg: &RunConfig, problem: &Problem) -> Result<SolveOutcome> {
    let a = &problem.a;
    let spec = smoother_spec(cfg, a)?;
    let boot = cfg.resolved_bootstrap(a.nrows());
    boot.validate()?;
    let h = setup(a, &spec, &boot, &cfg.coarsening, cfg.seed)?;
    let factor = if cfg.two_grid_iterations > 0 && h.num_levels() > 1 {
        Some(estimate_two_grid_factor(
            &h,
            cfg.two_grid_iterations,
            cfg.seed,
        )?)
    } else {
        None
    };
    let (x, mut report) = pcg(
        a,
        &problem.b,
        Some(&h),
        boot.pcg_tolerance,
        boot.pcg_max_iterations,
    )?;
    report.convergence_factor = factor;
    Ok(SolveOutcome {
        x,
        report,
        hierarchy: h,
    })
}

pub fn solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    solve_problem(cfg, &build_problem(cfg)?)
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

/// Writes `report.txt` and `residuals.csv` into `dir`.
pub fn write_solve_outputs(cfg: &RunConfig, out: &SolveOutcome, dir: &Path) -> Result<()> {
    let h = cfg.header();
    write_file(dir, "report.txt", &format!("{h}{}", out.report.to_text()))?;
    write_file(
        dir,
        "residuals.csv",
        &format!("{h}{}", out.report.residual_csv()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Caliber,
    CorrelationThreshold,
    StrengthThreshold,
    Kernel,
    K,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "caliber" => Self::Caliber,
            "correlation_threshold" => Self::CorrelationThreshold,
            "strength_threshold" => Self::StrengthThreshold,
            "kernel" => Self::Kernel,
            "K" | "k" => Self::K,
            _ => return Err(Error::InvalidArgument(format!("cannot sweep {name:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Caliber => "caliber",
            Self::CorrelationThreshold => "correlation_threshold",
            Self::StrengthThreshold => "strength_threshold",
            Self::Kernel => "kernel",
            Self::K => "K",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Self::Caliber => "lars.caliber",
            Self::CorrelationThreshold => "lars.correlation_threshold",
            Self::StrengthThreshold => "coarsening.strength_threshold",
            Self::Kernel => "kernel.kind",
            Self::K => "bootstrap.k",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<String>,
}

impl SweepSpec {
    /// Configuration of each sweep point, checking every value up front.
    pub fn configs(&self, base: &RunConfig) -> Result<Vec<RunConfig>> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("empty sweep".into()));
        }
        self.values
            .iter()
            .map(|v| {
                let mut c = base.clone();
                c.set(self.param.key(), v)?;
                c.validate()?;
                Ok(c)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    /// `ok`, `not_converged` or `failed: <reason>`.
    pub status: String,
    pub iterations: Option<usize>,
    pub mean_caliber: Option<f64>,
    pub ratios: Vec<f64>,
    pub two_grid_factor: Option<f64>,
}

/// One solve per sweep value on a shared problem. Failing points are recorded
/// and the sweep continues.
pub fn sweep(base: &RunConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let configs = spec.configs(base)?;
    let problem = build_problem(base)?;
    Ok(spec
        .values
        .iter()
        .zip(&configs)
        .map(|(value, cfg)| match solve_problem(cfg, &problem) {
            Ok(out) => SweepRow {
                value: value.clone(),
                status: if out.report.converged {
                    "ok"
                } else {
                    "not_converged"
                }
                .into(),
                iterations: Some(out.report.iterations),
                mean_caliber: out.hierarchy.levels[0]
                    .interp
                    .as_ref()
                    .map(|i| i.mean_caliber()),
                ratios: out.report.coarsening_ratios.clone(),
                two_grid_factor: out.report.convergence_factor,
            },
            Err(e) => SweepRow {
                value: value.clone(),
                status: format!("failed: {e}"),
                iterations: None,
                mean_caliber: None,
                ratios: Vec::new(),
                two_grid_factor: None,
            },
        })
        .collect())
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn sweep_csv(cfg: &RunConfig, spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut s = cfg.header();
    let _ = writeln!(s, "# sweep.parameter = {}", spec.param.name());
    s.push_str("value,status,iterations,mean_caliber,coarsening_ratios,two_grid_factor\n");
    for r in rows {
        let ratios: Vec<String> = r.ratios.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.value,
            r.status.replace(',', ";"),
            opt(r.iterations),
            opt(r.mean_caliber.map(|c| format!("{c:.6}"))),
            ratios.join(";"),
            opt(r.two_grid_factor.map(|f| format!("{f:.6}"))),
        );
    }
    s
}

/// LARS path of one variable's unrestricted local problem, built from the
/// initial smoothed test vectors.
pub fn lars_trace(cfg: &RunConfig, problem: &Problem, variable: usize) -> Result<LarsPath> {
    lars_trace_with_problem(cfg, problem, variable).map(|(_, p)| p)
}

fn lars_trace_with_problem(
    cfg: &RunConfig,
    problem: &Problem,
    variable: usize,
) -> Result<(crate::lars::RegressionProblem, LarsPath)> {
    let a = &problem.a;
    if variable >= a.nrows() {
        return Err(Error::InvalidArgument(format!(
            "variable {variable} out of range for {} unknowns",
            a.nrows()
        )));
    }
    let spec = smoother_spec(cfg, a)?;
    let vectors = generate_test_vectors(a, cfg.bootstrap.k, cfg.bootstrap.nu, &spec, cfg.seed)?;
    let kernel = cfg.coarsening.kernel;
    let nbhd = graph_neighborhood(a, variable, kernel.radius.saturating_sub(1).max(1))?;
    let prob = build_local_problem(variable, &vectors, &nbhd, &kernel, None)?;
    let opts = &cfg.coarsening.lars;
    let path = if opts.sign_constrained {
        lars_path_signed(&prob, opts)?
    } else {
        lars_path(&prob, opts)?
    };
    Ok((prob, path))
}

pub fn lars_trace_csv(cfg: &RunConfig, problem: &Problem, variable: usize) -> Result<String> {
    let (prob, path) = lars_trace_with_problem(cfg, problem, variable)?;
    Ok(format!("{}{}", cfg.header(), path_to_csv(&prob, &path)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarsenOutput {
    pub n: usize,
    pub n_coarse: usize,
    pub ratio: f64,
    pub total_swaps: usize,
    pub maxvol_converged: bool,
    /// `variable,x,y,is_coarse,sigma,caliber`
    pub vertices_csv: String,
    /// `i,j,p_penalized,p_final` for every interpolation entry.
    pub edges_csv: String,
    /// `i,j,strength` for every surviving strength edge.
    pub strength_csv: String,
}

impl CoarsenOutput {
    pub fn summary(&self) -> String {
        format!(
            "n={}\nn_coarse={}\ncoarsening_ratio={:.6}\nmaxvol_swaps={}\nmaxvol_converged={}\n",
            self.n, self.n_coarse, self.ratio, self.total_swaps, self.maxvol_converged
        )
    }
}

/// Runs the coarsening alone on the finest level with the initial smoothed
/// test vectors.
pub fn coarsen_report(cfg: &RunConfig, problem: &Problem) -> Result<CoarsenOutput> {
    let a = &problem.a;
    let spec = smoother_spec(cfg, a)?;
    let vectors = generate_test_vectors(a, cfg.bootstrap.k, cfg.bootstrap.nu, &spec, cfg.seed)?;
    let (interp, rep) = lar_coarsening(a, &vectors, &cfg.coarsening)?;
    let header = cfg.header();

    let mut vertices = header.clone();
    vertices.push_str("variable,x,y,is_coarse,sigma,caliber\n");
    for i in 0..interp.n() {
        let (x, y) = problem
            .coords
            .as_ref()
            .map_or((String::new(), String::new()), |c| {
                (format!("{:.12}", c[i][0]), format!("{:.12}", c[i][1]))
            });
        let cal = interp.rows[i].as_ref().map_or(0, |(c, _)| c.len());
        let _ = writeln!(
            vertices,
            "{i},{x},{y},{},{:e},{cal}",
            u8::from(interp.is_coarse(i)),
            rep.strength.sigma[i]
        );
    }

    let mut edges = header.clone();
    edges.push_str("i,j,p_penalized,p_final\n");
    for (i, row) in interp.rows.iter().enumerate() {
        let Some((cols, w)) = row else { continue };
        let initial = match &rep.initial_fits[i] {
            VariableFit::Fitted(f) => Some(f),
            _ => None,
        };
        for (&j, &p) in cols.iter().zip(w) {
            let pen = initial
                .and_then(|f| {
                    f.selected
                        .iter()
                        .position(|&s| s == j)
                        .map(|k| f.p_penalized[k])
                })
                .unwrap_or(0.0);
            let _ = writeln!(edges, "{i},{j},{pen:e},{p:e}");
        }
    }

    let mut strength = header;
    strength.push_str("i,j,strength\n");
    for (i, row) in rep.strength.edges.iter().enumerate() {
        for &(j, w) in row {
            let _ = writeln!(strength, "{i},{j},{w:e}");
        }
    }

    Ok(CoarsenOutput {
        n: interp.n(),
        n_coarse: interp.n_coarse(),
        ratio: interp.coarsening_ratio(),
        total_swaps: rep.total_swaps(),
        maxvol_converged: rep.maxvol_converged,
        vertices_csv: vertices,
        edges_csv: edges,
        strength_csv: strength,
    })
}

pub fn write_coarsen_outputs(cfg: &RunConfig, out: &CoarsenOutput, dir: &Path) -> Result<()> {
    write_file(dir, "vertices.csv", &out.vertices_csv)?;
    write_file(dir, "edges.csv", &out.edges_csv)?;
    write_file(dir, "strength.csv", &out.strength_csv)?;
    write_file(
        dir,
        "summary.txt",
        &format!("{}{}", cfg.header(), out.summary()),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub mesh_levels: usize,
    pub n: usize,
    pub depth: usize,
    pub setup_cycles: usize,
    pub pcg_iterations: usize,
    pub pcg_converged: bool,
    pub cg_iterations: usize,
}

/// One row per `(mesh levels, bootstrap cycles)` pair; the disc sector count
/// comes from `cfg`.
pub fn scaling(cfg: &RunConfig, cases: &[(usize, usize)]) -> Result<Vec<ScalingRow>> {
    let sectors = match cfg.problem {
        ProblemSource::Disc { sectors, .. } => sectors,
        ProblemSource::MatrixMarket(_) => {
            return Err(Error::InvalidArgument(
                "scaling needs a generated disc problem".into(),
            ))
        }
    };
    if cases.len() < 2 {
        return Err(Error::InvalidArgument(
            "scaling needs at least two mesh levels".into(),
        ));
    }
    cases
        .iter()
        .map(|&(levels, cycles)| {
            let mut c = cfg.clone();
            c.problem = ProblemSource::Disc { levels, sectors };
            c.setup_cycles = Some(cycles);
            c.two_grid_iterations = 0;
            let problem = build_problem(&c)?;
            let out = solve_problem(&c, &problem)?;
            let (_, plain) = cg(
                &problem.a,
                &problem.b,
                c.bootstrap.pcg_tolerance,
                100 * problem.a.nrows(),
            )?;
            Ok(ScalingRow {
                mesh_levels: levels,
                n: problem.a.nrows(),
                depth: out.hierarchy.num_levels(),
                setup_cycles: out.report.setup_cycles_used,
                pcg_iterations: out.report.iterations,
                pcg_converged: out.report.converged,
                cg_iterations: plain.iterations,
            })
        })
        .collect()
}

pub fn scaling_csv(cfg: &RunConfig, rows: &[ScalingRow]) -> String {
    let mut s = cfg.header();
    s.push_str("mesh_levels,n,levels,setup_cycles,pcg_iterations,pcg_converged,cg_iterations\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.mesh_levels,
            r.n,
            r.depth,
            r.setup_cycles,
            r.pcg_iterations,
            r.pcg_converged,
            r.cg_iterations
        );
    }
    s
}
