use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lars_amg::config::RunConfig;
use lars_amg::fem::assemble;
use lars_amg::harness::{self, SweepParam, SweepSpec};
use lars_amg::mm::save_matrix_market;

#[derive(Parser)]
#[command(
    name = "lars-amg",
    version,
    about = "Bootstrap AMG with least angle regression coarsening"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `run.output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Configuration override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Set up the hierarchy and solve with preconditioned CG.
    Solve,
    /// One solve per value of a parameter.
    Sweep {
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// LARS path of one variable's local regression.
    LarsTrace {
        #[arg(long)]
        variable: usize,
    },
    /// Coarsening of the finest level with vertex and edge tables.
    CoarsenReport,
    /// Preconditioned and plain CG iterations over mesh refinements.
    Scaling {
        /// Comma-separated mesh refinement levels.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 5, 6])]
        levels: Vec<usize>,
        /// Bootstrap cycles per level, comma-separated.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 2])]
        cycles: Vec<usize>,
        /// Number of random test vectors.
        #[arg(long, default_value_t = 16)]
        k: usize,
    },
    /// Write the disc mesh.
    Mesh,
    /// Write the stiffness matrix in Matrix Market format.
    Assemble,
}

enum Failure {
    Usage(anyhow::Error),
    NotConverged(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<lars_amg::Error> for Failure {
    fn from(e: lars_amg::Error) -> Self {
        Failure::Usage(e.into())
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    for pair in &c.set {
        cfg.set_pair(pair)
            .with_context(|| format!("--set {pair}"))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let dir = cfg.output_dir.clone();
    match cli.command {
        Command::Solve => {
            let out = harness::solve(&cfg)?;
            harness::write_solve_outputs(&cfg, &out, &dir)?;
            print!("{}", out.report.to_text());
            if !out.report.converged {
                return Err(Failure::NotConverged(format!(
                    "no convergence in {} iterations",
                    out.report.iterations
                )));
            }
        }
        Command::Sweep { param, values } => {
            let spec = SweepSpec {
                param: SweepParam::parse(&param)?,
                values,
            };
            let rows = harness::sweep(&cfg, &spec)?;
            let csv = harness::sweep_csv(&cfg, &spec, &rows);
            write(&dir, &format!("sweep_{}.csv", spec.param.name()), &csv)?;
        }
        Command::LarsTrace { variable } => {
            let problem = harness::build_problem(&cfg)?;
            let csv = harness::lars_trace_csv(&cfg, &problem, variable)?;
            write(&dir, &format!("lars_trace_{variable}.csv"), &csv)?;
        }
        Command::CoarsenReport => {
            let problem = harness::build_problem(&cfg)?;
            let out = harness::coarsen_report(&cfg, &problem)?;
            harness::write_coarsen_outputs(&cfg, &out, &dir)?;
            print!("{}", out.summary());
        }
        Command::Scaling { levels, cycles, k } => {
            if levels.len() != cycles.len() {
                return Err(anyhow::anyhow!("--levels and --cycles must have equal length").into());
            }
            let mut cfg = cfg;
            cfg.bootstrap.k = k;
            cfg.validate()?;
            let cases: Vec<(usize, usize)> = levels.into_iter().zip(cycles).collect();
            let rows = harness::scaling(&cfg, &cases)?;
            write(&dir, "scaling.csv", &harness::scaling_csv(&cfg, &rows))?;
            if let Some(r) = rows.iter().find(|r| !r.pcg_converged) {
                return Err(Failure::NotConverged(format!(
                    "no convergence on mesh level {}",
                    r.mesh_levels
                )));
            }
        }
        Command::Mesh => {
            let mesh = harness::mesh_for(&cfg)?;
            write(&dir, "mesh.txt", &mesh.to_text())?;
        }
        Command::Assemble => {
            let a = match harness::mesh_for(&cfg) {
                Ok(mesh) => assemble(&mesh, &harness::diffusion(&cfg)?)?.0,
                Err(_) => harness::build_problem(&cfg)?.a,
            };
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("matrix.mtx");
            save_matrix_market(&path, &a)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
