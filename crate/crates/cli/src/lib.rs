//! Command-line front-end: `solve`, `bench`, `mvee` and `replay`.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`.
//! Exit codes: 0 when the efficiency target was certified, 2 when the run
//! ended without certification (outputs are still written), 1 on bad input.

pub mod csvio;
pub mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use rexdesign::criteria::{i_to_a_transform, log_efficiency};
use rexdesign::models::{
    quadratic_space, random_space, run_benchmark, write_trajectory_csv, BenchInstance,
    QuadraticModelSpec, RandomModelSpec,
};
use rexdesign::mvee::{contains, mvee_solve};
use rexdesign::solvers::solve;
use rexdesign::{Algorithm, Criterion, DesignSpace, SolverConfig, TerminationReason};

use crate::csvio::{format_design, format_matrix, read_matrix, write_file};
use crate::manifest::{digest, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] rexdesign::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rexdesign",
    version,
    about = "Optimal approximate experimental designs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Compute an optimal design for a regressor matrix.
    Solve(SolveArgs),
    /// Run seeded comparisons on generated benchmark models.
    Bench(BenchArgs),
    /// Minimum-volume origin-centred ellipsoid enclosing a point set.
    Mvee(MveeArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    D,
    A,
    /// I-optimality; needs `--moment`.
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmArg {
    Rex,
    Vem,
    Mul,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Rex => Algorithm::Rex,
            AlgorithmArg::Vem => Algorithm::Vem,
            AlgorithmArg::Mul => Algorithm::Mul,
        }
    }
}

/// Solver flags shared by `solve` and `bench`.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SolverFlags {
    /// Greedy batch factor; REX uses min(ceil(gamma m), n) greedy points.
    #[arg(long, default_value_t = 4.0)]
    pub gamma: f64,
    /// Certified efficiency at which to stop.
    #[arg(long, default_value_t = 0.999999)]
    pub eff: f64,
    /// Wall-clock budget in seconds.
    #[arg(long = "t-max", default_value_t = 60.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exchanges between full refactorizations of the information matrix.
    #[arg(long = "refresh-cadence", default_value_t = 64)]
    pub refresh_cadence: usize,
    /// Optional cap on outer iterations.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
}

impl SolverFlags {
    fn config(&self, criterion: Criterion, algorithm: Algorithm) -> SolverConfig {
        SolverConfig {
            criterion,
            algorithm,
            gamma: self.gamma,
            eff_target: self.eff,
            t_max: self.t_max,
            seed: self.seed,
            refresh_cadence: self.refresh_cadence,
            max_iterations: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SolveArgs {
    /// Regressor matrix, one design point per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "d")]
    pub criterion: CriterionArg,
    /// Moment matrix L (m x m, SPD) for `--criterion i`.
    #[arg(long)]
    pub moment: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rex")]
    pub algorithm: AlgorithmArg,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Record wall-clock seconds in trajectory.csv (makes it run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Full quadratic model on a grid over [-1, 1]^d.
    Quadratic,
    /// Gaussian random regressors.
    Random,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub family: Family,
    /// Cube dimension (quadratic).
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid points per axis (quadratic).
    #[arg(long = "points-per-axis")]
    pub points_per_axis: Option<usize>,
    /// Number of points (random).
    #[arg(long)]
    pub n: Option<usize>,
    /// Regressor dimension (random).
    #[arg(long)]
    pub m: Option<usize>,
    /// Seed for the random model's regressors.
    #[arg(long = "model-seed", default_value_t = 0)]
    pub model_seed: u64,
    /// Comma-separated list of rex, vem, mul.
    #[arg(long, value_delimiter = ',', default_value = "rex")]
    pub algorithms: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value = "d")]
    pub criterion: CriterionArg,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct MveeArgs {
    /// Points, one per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Relative accuracy: max_x d_x <= m (1 + eps).
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "t-max", default_value_t = 60.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 4.0)]
    pub gamma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments and runs, printing errors to stderr; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn execute(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Mvee(a) => cmd_mvee(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn exit_code(reason: TerminationReason) -> i32 {
    match reason {
        TerminationReason::EffReached => EXIT_OK,
        _ => EXIT_UNCERTIFIED,
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn canonical(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn load_space(path: &Path) -> Result<DesignSpace, CliError> {
    let mat = read_matrix(path)?;
    DesignSpace::new(mat.data, mat.cols)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn core_criterion(c: CriterionArg) -> Criterion {
    match c {
        CriterionArg::D => Criterion::D,
        CriterionArg::A | CriterionArg::I => Criterion::A,
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let mut inputs = vec![digest("input", &args.input)?];
    let mut space = load_space(&args.input)?;
    match (args.criterion, &args.moment) {
        (CriterionArg::I, Some(path)) => {
            inputs.push(digest("moment", path)?);
            let mat = read_matrix(path)?;
            let l = DMatrix::from_row_slice(mat.rows, mat.cols, &mat.data);
            space = i_to_a_transform(&space, &l)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        (CriterionArg::I, None) => {
            return Err(CliError::Usage(
                "--criterion i needs --moment <path> (an m x m SPD moment matrix CSV)".into(),
            ));
        }
        (_, Some(_)) => {
            return Err(CliError::Usage(
                "--moment is only valid with --criterion i".into(),
            ));
        }
        (_, None) => {}
    }

    let config = args
        .solver
        .config(core_criterion(args.criterion), args.algorithm.into());
    let out = solve(&space, &config)?;

    prepare_out(&args.out)?;
    write_file(
        &args.out.join("design.csv"),
        format_design(&out.design).as_bytes(),
    )?;
    let instance = args
        .input
        .file_stem()
        .map_or("input".into(), |s| s.to_string_lossy().into_owned());
    let mut traj = Vec::new();
    write_trajectory_csv(
        &mut traj,
        &instance,
        config.algorithm.name(),
        0,
        &out.trajectory,
        args.timing,
    )
    .expect("write to memory");
    write_file(&args.out.join("trajectory.csv"), &traj)?;

    let mut resolved = args.clone();
    resolved.input = canonical(&args.input);
    resolved.moment = args.moment.as_deref().map(canonical);
    let outcome = json!({
        "termination": out.reason.name(),
        "criterion_value": out.value,
        "eff_bound": out.bound.value,
        "log_eff": log_efficiency(out.bound.value),
        "max_g": out.bound.max_g,
        "support_size": out.design.support_size(),
        "iterations": out.trajectory.len() - 1,
    });
    RunManifest::new(Command::Solve(resolved), inputs, outcome).write(&args.out)?;

    println!(
        "{}: {} after {} iterations, criterion {:.12e}, efficiency bound {:.9}, support {}",
        instance,
        out.reason.name(),
        out.trajectory.len() - 1,
        out.value,
        out.bound.value,
        out.design.support_size()
    );
    Ok(exit_code(out.reason))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let algorithms = args
        .algorithms
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let criterion = match args.criterion {
        CriterionArg::I => {
            return Err(CliError::Usage("bench supports --criterion d or a".into()));
        }
        c => core_criterion(c),
    };
    let missing = |flag: &str| CliError::Usage(format!("{:?} model needs --{flag}", args.family));
    let (name, space) = match args.family {
        Family::Quadratic => {
            let spec = QuadraticModelSpec {
                d: args.d.ok_or_else(|| missing("d"))?,
                points_per_axis: args
                    .points_per_axis
                    .ok_or_else(|| missing("points-per-axis"))?,
            };
            (
                format!("quadratic_d{}_p{}", spec.d, spec.points_per_axis),
                quadratic_space(spec)?,
            )
        }
        Family::Random => {
            let spec = RandomModelSpec {
                n: args.n.ok_or_else(|| missing("n"))?,
                m: args.m.ok_or_else(|| missing("m"))?,
                seed: args.model_seed,
            };
            (
                format!("random_n{}_m{}_s{}", spec.n, spec.m, spec.seed),
                random_space(spec)?,
            )
        }
    };
    let config = args.solver.config(criterion, Algorithm::Rex);
    config.validate(space.m())?;

    let instances = [BenchInstance { name, space }];
    let report = run_benchmark(&instances, &algorithms, &config, args.repeats, args.workers);

    prepare_out(&args.out)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("write to memory");
    write_file(&args.out.join("bench.csv"), &csv)?;

    let runs: Vec<_> = report
        .runs
        .iter()
        .map(|r| match &r.result {
            Ok(s) => json!({
                "instance": r.instance, "algorithm": r.algorithm.name(), "repeat": r.repeat,
                "seed": r.seed, "termination": s.reason.name(), "criterion_value": s.value,
                "eff_bound": s.eff_bound, "support_size": s.support_size,
                "iterations": s.trajectory.len() - 1,
                "seconds": s.trajectory.last().map_or(0.0, |t| t.seconds),
            }),
            Err(e) => json!({
                "instance": r.instance, "algorithm": r.algorithm.name(), "repeat": r.repeat,
                "seed": r.seed, "error": e,
            }),
        })
        .collect();
    let mut resolved = args.clone();
    resolved.algorithms = algorithms.iter().map(|a| a.name().to_string()).collect();
    RunManifest::new(
        Command::Bench(resolved),
        Vec::new(),
        json!({ "runs": runs }),
    )
    .write(&args.out)?;

    for r in &report.runs {
        match &r.result {
            Ok(s) => println!(
                "{} {} repeat {}: {} in {} iterations, {:.3}s, log-eff {:.2}",
                r.instance,
                r.algorithm,
                r.repeat,
                s.reason.name(),
                s.trajectory.len() - 1,
                s.trajectory.last().map_or(0.0, |t| t.seconds),
                log_efficiency(s.eff_bound)
            ),
            Err(e) => println!(
                "{} {} repeat {}: failed: {e}",
                r.instance, r.algorithm, r.repeat
            ),
        }
    }
    Ok(EXIT_OK)
}

/// Containment slack re-checked on every input point before `mvee` exits.
pub const MVEE_CONTAIN_TOL: f64 = 1e-9;

pub fn cmd_mvee(args: &MveeArgs) -> Result<i32, CliError> {
    let inputs = vec![digest("input", &args.input)?];
    let mat = read_matrix(&args.input)?;
    let config = SolverConfig {
        seed: args.seed,
        t_max: args.t_max,
        gamma: args.gamma,
        ..SolverConfig::default()
    };
    let sol = mvee_solve(&mat.data, mat.cols, args.eps, &config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.input.display())))?;
    for (x, p) in mat.data.chunks_exact(mat.cols).enumerate() {
        if !contains(&sol.ellipsoid, p, MVEE_CONTAIN_TOL) {
            return Err(CliError::Usage(format!(
                "point {} lies outside the computed ellipsoid (gauge {})",
                x + 1,
                sol.ellipsoid.gauge(p)
            )));
        }
    }

    prepare_out(&args.out)?;
    let h = &sol.ellipsoid.shape;
    write_file(
        &args.out.join("ellipsoid.csv"),
        format_matrix(h.nrows(), h.ncols(), |i, j| h[(i, j)]).as_bytes(),
    )?;
    write_file(
        &args.out.join("design.csv"),
        format_design(&sol.design).as_bytes(),
    )?;

    let cert = sol.certificate;
    let mut resolved = args.clone();
    resolved.input = canonical(&args.input);
    let outcome = json!({
        "termination": cert.reason.name(),
        "max_variance": cert.max_variance,
        "eff_bound": cert.eff_bound,
        "design_logdet": cert.design_logdet,
        "ellipsoid_logdet": sol.ellipsoid.logdet(),
        "support_size": sol.design.support_size(),
    });
    RunManifest::new(Command::Mvee(resolved), inputs, outcome).write(&args.out)?;
    println!(
        "mvee: {}, max variance {:.12} (m = {}), support {}",
        cert.reason.name(),
        cert.max_variance,
        mat.cols,
        sol.design.support_size()
    );
    Ok(exit_code(cert.reason))
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<i32, CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    manifest.verify_inputs()?;
    let command = match manifest.command {
        Command::Solve(a) => Command::Solve(SolveArgs {
            out: args.out.clone(),
            ..a
        }),
        Command::Bench(a) => Command::Bench(BenchArgs {
            out: args.out.clone(),
            ..a
        }),
        Command::Mvee(a) => Command::Mvee(MveeArgs {
            out: args.out.clone(),
            ..a
        }),
        Command::Replay(_) => {
            return Err(CliError::Usage("a manifest cannot record a replay".into()));
        }
    };
    execute(&command)
}
