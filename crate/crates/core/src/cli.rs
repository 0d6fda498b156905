//! Experiment driver: benchmark runs with file output and the Lloyd demo.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adapt::{run_hat_afem, run_standard_afem, AdaptError, AdaptHistory, HatConfig, StandardConfig, DEFAULT_MAX_ITERS};
use crate::benchmarks::{square_smooth, BenchmarkId};
use crate::cvt::{lloyd_step, CvtError, DensityField};
use crate::estimate::EstimatorKind;
use crate::fem::{error_norms, solve_problem, FemError};
use crate::mesh::io::{write_triangle, write_vtk, Field, MeshIoError};
use crate::mesh::{mean_quality, MeshError};
use crate::triangulate::{conforming_delaunay, sample_boundary, structured_mesh, TriangulationError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot write to {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    MeshIo(#[from] MeshIoError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Cvt(#[from] CvtError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Dörfler marking with newest-vertex bisection.
    Standard,
    /// Rate-fitted midpoint insertion with CVDT optimization.
    Hat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Residual,
    Recovery,
    WeightedRecovery,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Residual => Self::Residual,
            EstimatorArg::Recovery => Self::Recovery,
            EstimatorArg::WeightedRecovery => Self::WeightedRecovery,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hat-afem", version, about = "Adaptive P1 finite elements with CVDT mesh optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lloyd smoothing of random points with the error history as CSV.
    LloydDemo {
        #[arg(long, default_value_t = 1089)]
        points: usize,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value = "lshape", value_parser = parse_benchmark)]
    pub benchmark: BenchmarkId,
    #[arg(long, value_enum, default_value_t = Algorithm::Hat)]
    pub algorithm: Algorithm,
    /// Defaults to the weighted estimator for `peak`, recovery otherwise.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    /// Defaults to the benchmark's tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    /// Initial vertex count for `hat`; defaults per benchmark.
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub lloyd_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Solve limit for `standard`.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Record wall-clock seconds in `history.csv` (zero otherwise, which
    /// keeps the file reproducible).
    #[arg(long)]
    pub timings: bool,
}

fn parse_benchmark(s: &str) -> Result<BenchmarkId, String> {
    s.parse()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmark: BenchmarkId,
    pub algorithm: Algorithm,
    pub estimator: EstimatorKind,
    pub tol: f64,
    pub theta: f64,
    pub n0: usize,
    pub lloyd_iters: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub max_iters: usize,
    pub timings: bool,
}

impl RunConfig {
    /// Paper defaults for `benchmark`, writing to `out`.
    pub fn new(benchmark: BenchmarkId, algorithm: Algorithm, out: impl Into<PathBuf>) -> Self {
        Self {
            benchmark,
            algorithm,
            estimator: benchmark.default_estimator(),
            tol: benchmark.default_tol(),
            theta: 0.3,
            n0: benchmark.default_n0(),
            lloyd_iters: 20,
            seed: 1,
            out: out.into(),
            max_iters: DEFAULT_MAX_ITERS,
            timings: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0) {
            return Err(CliError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(CliError::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if self.max_iters == 0 {
            return Err(CliError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        let mut c = RunConfig::new(a.benchmark, a.algorithm, a.out);
        if let Some(e) = a.estimator {
            c.estimator = e.into();
        }
        if let Some(t) = a.tol {
            c.tol = t;
        }
        if let Some(n) = a.n0 {
            c.n0 = n;
        }
        c.theta = a.theta;
        c.lloyd_iters = a.lloyd_iters;
        c.seed = a.seed;
        c.max_iters = a.max_iters;
        c.timings = a.timings;
        c
    }
}

/// Process exit code for a finished run: 0 on convergence, 2 otherwise.
pub fn exit_code(history: &AdaptHistory) -> i32 {
    if history.converged {
        0
    } else {
        2
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `k,N,error,eta,effectivity,seconds` with 17 significant digits.
pub fn history_csv(history: &AdaptHistory, timings: bool) -> String {
    let mut s = String::from("k,N,error,eta,effectivity,seconds\n");
    for r in &history.records {
        let error = r.error_value().unwrap_or(f64::NAN);
        let seconds = if timings { r.seconds } else { 0.0 };
        writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.k,
            r.vertices,
            error,
            r.eta,
            r.eta / error,
            seconds
        )
        .unwrap();
    }
    s
}

/// Run the configured adaptive loop and write `history.csv` plus one VTK
/// and one `.node`/`.ele` pair per iteration into `config.out`.
pub fn run(config: &RunConfig) -> Result<AdaptHistory, CliError> {
    config.validate()?;
    create_dir(&config.out)?;
    let problem = config.benchmark.problem();
    let history = match config.algorithm {
        Algorithm::Standard => {
            let mesh = structured_mesh(problem.domain.clone(), config.benchmark.initial_spacing())?;
            let standard = StandardConfig {
                tol: config.tol,
                theta: config.theta,
                estimator: config.estimator,
                max_iters: config.max_iters,
            };
            run_standard_afem(&problem, mesh, &standard)?
        }
        Algorithm::Hat => {
            let mut hat = HatConfig::new(config.tol, config.n0, config.estimator);
            hat.lloyd_iters = config.lloyd_iters;
            hat.seed = config.seed;
            run_hat_afem(&problem, &hat)?
        }
    };
    for r in &history.records {
        let stem = config.out.join(format!("iter_{:02}", r.k));
        write_triangle(&r.mesh, &stem)?;
        write_vtk(
            &r.mesh,
            &stem.with_extension("vtk"),
            &[Field {
                name: "solution",
                values: &r.solution.values,
            }],
            &[Field {
                name: "indicator",
                values: &r.estimate.per_element,
            }],
        )?;
    }
    write_file(&config.out.join("history.csv"), &history_csv(&history, config.timings))?;
    Ok(history)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydRow {
    pub iteration: usize,
    pub vertices: usize,
    /// `‖∇u − ∇u_h‖` for the smooth square problem.
    pub error: f64,
    pub mean_quality: f64,
}

/// Random points in the unit square, then `iters` uniform-density Lloyd
/// steps, recording the FE gradient error and mean quality after each.
///
/// The boundary is sampled uniformly at spacing `1/(√n − 1)` so the
/// triangulation covers the square; the remaining points are uniform random.
pub fn lloyd_demo(n_points: usize, iters: usize, seed: u64) -> Result<Vec<LloydRow>, CliError> {
    if n_points < 10 {
        return Err(CliError::Config(format!("lloyd_demo needs at least 10 points, got {n_points}")));
    }
    let problem = square_smooth();
    let domain = problem.domain.clone();
    let spacing = 1.0 / ((n_points as f64).sqrt() - 1.0);
    let boundary = sample_boundary(&domain, spacing);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior: Vec<_> = (boundary.len()..n_points)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .filter(|&p| p[0] > 0.0 && p[1] > 0.0)
        .collect();
    let mut mesh = conforming_delaunay(domain, &interior, &boundary)?;
    let mut rows = Vec::with_capacity(iters + 1);
    for iteration in 0..=iters {
        if iteration > 0 {
            let density = DensityField::uniform(Arc::new(mesh.clone()));
            mesh = lloyd_step(&mesh, &density)?;
        }
        let mesh_rc = Arc::new(mesh.clone());
        let u_h = solve_problem(mesh_rc, &problem)?;
        rows.push(LloydRow {
            iteration,
            vertices: mesh.num_vertices(),
            error: error_norms(&u_h, &problem)?.grad_l2,
            mean_quality: mean_quality(&mesh)?,
        });
    }
    Ok(rows)
}

pub fn lloyd_csv(rows: &[LloydRow]) -> String {
    let mut s = String::from("iteration,N,error,mean_quality\n");
    for r in rows {
        writeln!(s, "{},{},{:.16e},{:.16e}", r.iteration, r.vertices, r.error, r.mean_quality).unwrap();
    }
    s
}

/// Run [`lloyd_demo`] and write `lloyd.csv` into `out`.
pub fn write_lloyd_demo(n_points: usize, iters: usize, seed: u64, out: &Path) -> Result<Vec<LloydRow>, CliError> {
    let rows = lloyd_demo(n_points, iters, seed)?;
    create_dir(out)?;
    write_file(&out.join("lloyd.csv"), &lloyd_csv(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_map_to_config() {
        let cli = Cli::try_parse_from(["hat-afem", "--benchmark", "peak", "--tol", "30", "--seed", "7"]).unwrap();
        let c = RunConfig::from(cli.run);
        assert_eq!(c.benchmark, BenchmarkId::Peak);
        assert_eq!(c.estimator, EstimatorKind::WeightedRecovery);
        assert_eq!((c.tol, c.seed, c.n0), (30.0, 7, 280));
        assert!(Cli::try_parse_from(["hat-afem", "--benchmark", "circle"]).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut c = RunConfig::new(BenchmarkId::LShape, Algorithm::Standard, "unused");
        c.theta = 1.0;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.theta = 0.3;
        c.tol = 0.0;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn lloyd_demo_baseline_only() {
        let rows = lloyd_demo(100, 0, 3).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].vertices, 100);
        assert!(matches!(lloyd_demo(9, 1, 3), Err(CliError::Config(_))));
    }
}
