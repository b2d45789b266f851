//! Run configuration as flat `section.key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so an empty file is a complete configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coarsening::{CoarseningParams, KernelKind, KernelSpec, WeightsMode};
use crate::error::{Error, Result};
use crate::fem::AnisotropyParams;
use crate::lars::LarsOptions;
use crate::multilevel::BootstrapConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemSource {
    /// Unit disc mesh refined `levels` times from `sectors` triangles.
    Disc {
        levels: usize,
        sectors: usize,
    },
    MatrixMarket(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmootherChoice {
    #[default]
    GaussSeidel,
    /// Block Gauss-Seidel over this many graph-grown blocks.
    BlockGaussSeidel(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub anisotropy: AnisotropyParams,
    pub coarsening: CoarseningParams,
    pub bootstrap: BootstrapConfig,
    /// Bootstrap cycles chosen from the problem size when unset.
    pub setup_cycles: Option<usize>,
    /// `n_eigenvectors = K` when unset.
    pub n_eigenvectors: Option<usize>,
    pub smoother: SmootherChoice,
    /// Power iterations of the two-grid estimate; 0 disables it.
    pub two_grid_iterations: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Disc {
                levels: 3,
                sectors: 6,
            },
            anisotropy: AnisotropyParams {
                alpha: 0.0,
                epsilon: 1.0,
            },
            coarsening: CoarseningParams::default(),
            bootstrap: BootstrapConfig::default(),
            setup_cycles: None,
            n_eigenvectors: None,
            smoother: SmootherChoice::GaussSeidel,
            two_grid_iterations: 50,
            seed: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidArgument(format!(
            "invalid value {value:?} for {key}"
        ))),
    }
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: ln + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: ln + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let lars = &mut self.coarsening.lars;
        match key {
            "problem.source" => {
                self.problem = match value {
                    "disc" => match self.problem {
                        ProblemSource::Disc { .. } => self.problem.clone(),
                        ProblemSource::MatrixMarket(_) => ProblemSource::Disc {
                            levels: 3,
                            sectors: 6,
                        },
                    },
                    "matrix_market" => match self.problem {
                        ProblemSource::MatrixMarket(_) => self.problem.clone(),
                        ProblemSource::Disc { .. } => ProblemSource::MatrixMarket(PathBuf::new()),
                    },
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown problem source {value:?}"
                        )))
                    }
                }
            }
            "problem.mesh_levels" | "problem.mesh_sectors" => {
                let ProblemSource::Disc { levels, sectors } = &mut self.problem else {
                    return Err(Error::InvalidArgument(format!(
                        "{key} requires problem.source=disc"
                    )));
                };
                let n = parse(key, value)?;
                if key.ends_with("levels") {
                    *levels = n;
                } else {
                    *sectors = n;
                }
            }
            "problem.matrix" => self.problem = ProblemSource::MatrixMarket(PathBuf::from(value)),
            "problem.alpha" => self.anisotropy.alpha = parse(key, value)?,
            "problem.epsilon" => self.anisotropy.epsilon = parse(key, value)?,
            "kernel.kind" => {
                self.coarsening.kernel.kind = match value {
                    "tri_cube" => KernelKind::TriCube,
                    "nearest_neighbor" => KernelKind::NearestNeighbor,
                    _ => return Err(Error::InvalidArgument(format!("unknown kernel {value:?}"))),
                }
            }
            "kernel.radius" => self.coarsening.kernel.radius = parse(key, value)?,
            "kernel.distance" => {
                if value != "graph" {
                    return Err(Error::InvalidArgument(
                        "only graph distance is supported".into(),
                    ));
                }
            }
            "lars.correlation_threshold" => lars.correlation_threshold = parse(key, value)?,
            "lars.caliber" => lars.caliber = parse(key, value)?,
            "lars.max_active_factor" => lars.max_active_factor = parse(key, value)?,
            "lars.sign_constrained" => lars.sign_constrained = parse_bool(key, value)?,
            "coarsening.strength_threshold" => {
                self.coarsening.strength_threshold = parse(key, value)?
            }
            "coarsening.maxvol_iterations" => {
                self.coarsening.maxvol_iterations = parse(key, value)?
            }
            "coarsening.weights" => {
                if value != "uniform" {
                    return Err(Error::InvalidArgument(
                        "only uniform weights are supported".into(),
                    ));
                }
                self.coarsening.weights_mode = WeightsMode::Uniform;
            }
            "smoother.kind" => {
                self.smoother = match value {
                    "gauss_seidel" => SmootherChoice::GaussSeidel,
                    "block_gauss_seidel" => SmootherChoice::BlockGaussSeidel(match self.smoother {
                        SmootherChoice::BlockGaussSeidel(b) => b,
                        SmootherChoice::GaussSeidel => 6,
                    }),
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown smoother {value:?}"
                        )))
                    }
                }
            }
            "smoother.blocks" => {
                let b = parse(key, value)?;
                if let SmootherChoice::BlockGaussSeidel(nb) = &mut self.smoother {
                    *nb = b;
                } else {
                    return Err(Error::InvalidArgument(
                        "smoother.blocks requires smoother.kind=block_gauss_seidel".into(),
                    ));
                }
            }
            "bootstrap.k" => self.bootstrap.k = parse(key, value)?,
            "bootstrap.nu" => self.bootstrap.nu = parse(key, value)?,
            "bootstrap.setup_cycles" => self.setup_cycles = parse_optional(key, value)?,
            "bootstrap.n_eigenvectors" => self.n_eigenvectors = parse_optional(key, value)?,
            "bootstrap.coarsest_cap" => self.bootstrap.coarsest_cap = parse(key, value)?,
            "bootstrap.max_levels" => self.bootstrap.max_levels = parse(key, value)?,
            "solver.tolerance" => self.bootstrap.pcg_tolerance = parse(key, value)?,
            "solver.max_iterations" => self.bootstrap.pcg_max_iterations = parse(key, value)?,
            "report.two_grid_iterations" => self.two_grid_iterations = parse(key, value)?,
            "run.seed" => self.seed = parse(key, value)?,
            "run.output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(Error::InvalidArgument(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Bootstrap settings with the size-dependent defaults resolved.
    pub fn resolved_bootstrap(&self, n: usize) -> BootstrapConfig {
        let mut b = self.bootstrap.clone();
        b.setup_cycles = self
            .setup_cycles
            .unwrap_or_else(|| BootstrapConfig::default_cycles(n));
        b.n_eigenvectors = self.n_eigenvectors.unwrap_or(b.k);
        b
    }

    pub fn validate(&self) -> Result<()> {
        match &self.problem {
            ProblemSource::Disc { sectors, .. } if *sectors < 3 => {
                return Err(Error::InvalidArgument(
                    "problem.mesh_sectors must be at least 3".into(),
                ))
            }
            ProblemSource::MatrixMarket(p) if p.as_os_str().is_empty() => {
                return Err(Error::InvalidArgument("problem.matrix is required".into()))
            }
            _ => {}
        }
        if !(self.anisotropy.epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "problem.epsilon must be positive".into(),
            ));
        }
        if let SmootherChoice::BlockGaussSeidel(0) = self.smoother {
            return Err(Error::InvalidArgument(
                "smoother.blocks must be positive".into(),
            ));
        }
        self.coarsening.validate()?;
        self.resolved_bootstrap(0).validate()
    }

    /// Every setting, one `key = value` per line, in the format `parse`
    /// reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &self.problem {
            ProblemSource::Disc { levels, sectors } => {
                put("problem.source", "disc".into());
                put("problem.mesh_levels", levels.to_string());
                put("problem.mesh_sectors", sectors.to_string());
            }
            ProblemSource::MatrixMarket(p) => {
                put("problem.source", "matrix_market".into());
                put("problem.matrix", p.display().to_string());
            }
        }
        put("problem.alpha", self.anisotropy.alpha.to_string());
        put("problem.epsilon", self.anisotropy.epsilon.to_string());
        let KernelSpec { kind, radius } = self.coarsening.kernel;
        put("kernel.distance", "graph".into());
        put(
            "kernel.kind",
            match kind {
                KernelKind::TriCube => "tri_cube",
                KernelKind::NearestNeighbor => "nearest_neighbor",
            }
            .into(),
        );
        put("kernel.radius", radius.to_string());
        let l: &LarsOptions = &self.coarsening.lars;
        put(
            "lars.correlation_threshold",
            l.correlation_threshold.to_string(),
        );
        put("lars.caliber", l.caliber.to_string());
        put("lars.max_active_factor", l.max_active_factor.to_string());
        put("lars.sign_constrained", l.sign_constrained.to_string());
        put(
            "coarsening.strength_threshold",
            self.coarsening.strength_threshold.to_string(),
        );
        put(
            "coarsening.maxvol_iterations",
            self.coarsening.maxvol_iterations.to_string(),
        );
        put("coarsening.weights", "uniform".into());
        match self.smoother {
            SmootherChoice::GaussSeidel => put("smoother.kind", "gauss_seidel".into()),
            SmootherChoice::BlockGaussSeidel(b) => {
                put("smoother.kind", "block_gauss_seidel".into());
                put("smoother.blocks", b.to_string());
            }
        }
        let b = &self.bootstrap;
        let auto = |o: Option<usize>| o.map_or_else(|| "auto".to_string(), |v| v.to_string());
        put("bootstrap.k", b.k.to_string());
        put("bootstrap.nu", b.nu.to_string());
        put("bootstrap.setup_cycles", auto(self.setup_cycles));
        put("bootstrap.n_eigenvectors", auto(self.n_eigenvectors));
        put("bootstrap.coarsest_cap", b.coarsest_cap.to_string());
        put("bootstrap.max_levels", b.max_levels.to_string());
        put("solver.tolerance", b.pcg_tolerance.to_string());
        put("solver.max_iterations", b.pcg_max_iterations.to_string());
        put(
            "report.two_grid_iterations",
            self.two_grid_iterations.to_string(),
        );
        put("run.seed", self.seed.to_string());
        put("run.output_dir", self.output_dir.display().to_string());
        s
    }

    /// `to_text` with every line prefixed by `# `, for output file headers.
    /// The output directory is left out so that runs differing only in where
    /// they write produce identical files.
    pub fn header(&self) -> String {
        self.to_text()
            .lines()
            .filter(|l| !l.starts_with("run.output_dir"))
            .map(|l| format!("# {l}\n"))
            .collect()
    }
}
