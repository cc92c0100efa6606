//! Argument parsing and the three subcommands.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 when a solve did not
//! converge (its files are still written), 1 on output failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use dmix_core::dma::{self, DmaProblem, Method};
use dmix_core::eval::{self, Reference};
use dmix_core::moments::{dirac_moments, residual, MomentTable};
use dmix_core::pwc;
use dmix_core::solver::SolverOptions;

use crate::format::{float, write_csv, write_json};
use crate::schema::{DensitySpec, EvalFile, InputDigest, Manifest, ProblemFile, SolutionFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Output { .. } => 1,
        }
    }
}

fn input_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "dmix",
    version,
    about = "Maximum-entropy Dirac mixture approximation from moments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a Dirac mixture matching prescribed moments.
    Solve(SolveArgs),
    /// Compute power moments of a density.
    Moments(MomentsArgs),
    /// Score a solution: residual, entropy, feasibility, CvM distance.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Maxent,
    Lm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Maxent => Method::MaxEnt,
            MethodArg::Lm => Method::Lm,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "preset", "manifest"])))]
pub struct SolveArgs {
    /// Problem JSON.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Built-in experiment: gauss1d, gm1d_m4, gm1d_m6, gauss2d_sym.
    #[arg(long)]
    pub preset: Option<String>,
    /// Repeat the run recorded in a manifest.json.
    #[arg(long, conflicts_with_all = ["components", "seed", "method", "restarts"])]
    pub manifest: Option<PathBuf>,
    /// Number of Dirac components.
    #[arg(long = "L", id = "components")]
    pub components: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    /// Density JSON (gaussian, gaussian-mixture, dirac-mixture) or a solution.json.
    #[arg(long)]
    pub input: PathBuf,
    /// Highest total moment order.
    #[arg(long)]
    pub order: u32,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("ref").args(["preset", "reference"])))]
pub struct EvalArgs {
    /// A solution.json written by `dmix solve`.
    #[arg(long)]
    pub solution: PathBuf,
    /// Evaluate against this preset's reference density.
    #[arg(long)]
    pub preset: Option<String>,
    /// Reference density JSON (gaussian or gaussian-mixture).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Moments(args) => cmd_moments(&args),
        Command::Eval(args) => cmd_eval(&args),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| input_err(path.display(), e))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| input_err(path.display(), e))
}

fn output_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn out<T>(path: &Path, r: std::io::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A fully resolved solve: what to run and how to record it.
#[derive(Debug)]
pub struct RunConfig {
    pub problem: DmaProblem,
    pub method: Method,
    pub manifest: Manifest,
}

fn apply_overrides(options: &mut SolverOptions, args: &SolveArgs) {
    if let Some(seed) = args.seed {
        options.seed = seed;
    }
    if let Some(restarts) = args.restarts {
        options.restarts = restarts;
    }
}

fn problem_from_input(
    path: &Path,
    components: Option<usize>,
) -> Result<(DmaProblem, InputDigest), CliError> {
    let bytes = read(path)?;
    let file: ProblemFile = parse(path, &bytes)?;
    let mut problem = file
        .into_problem()
        .map_err(|e| input_err(path.display(), e))?;
    if let Some(l) = components {
        problem.components = l;
    }
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    Ok((problem, digest))
}

fn problem_from_preset(name: &str, components: Option<usize>) -> Result<DmaProblem, CliError> {
    let preset = eval::preset(name).map_err(|e| CliError::Input(e.to_string()))?;
    let l = components.unwrap_or(preset.component_counts()[0]);
    preset
        .problem(l)
        .map_err(|e| CliError::Input(e.to_string()))
}

pub fn resolve(args: &SolveArgs) -> Result<RunConfig, CliError> {
    if let Some(path) = &args.manifest {
        let manifest: Manifest = parse(path, &read(path)?)?;
        let mut problem = match (&manifest.preset, &manifest.input) {
            (Some(name), None) => problem_from_preset(name, Some(manifest.components))?,
            (None, Some(input)) => {
                let (p, digest) =
                    problem_from_input(Path::new(&input.path), Some(manifest.components))?;
                if digest.sha256 != input.sha256 {
                    return Err(CliError::Input(format!(
                        "{} changed since the manifest was written",
                        input.path
                    )));
                }
                p
            }
            _ => {
                return Err(CliError::Input(format!(
                    "{}: needs exactly one of preset, input",
                    path.display()
                )))
            }
        };
        problem.options = manifest.options.clone();
        return Ok(RunConfig {
            problem,
            method: manifest.method,
            manifest,
        });
    }
    let method = args.method.map_or(Method::Auto, Method::from);
    let (mut problem, preset, input) = match (&args.input, &args.preset) {
        (Some(path), None) => {
            let (p, digest) = problem_from_input(path, args.components)?;
            (p, None, Some(digest))
        }
        (None, Some(name)) => (
            problem_from_preset(name, args.components)?,
            Some(name.clone()),
            None,
        ),
        _ => {
            return Err(CliError::Input(
                "give exactly one of --input, --preset".into(),
            ))
        }
    };
    apply_overrides(&mut problem.options, args);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        command: "solve".into(),
        preset,
        input,
        components: problem.components,
        method,
        options: problem.options.clone(),
    };
    Ok(RunConfig {
        problem,
        method,
        manifest,
    })
}

fn solve_error(e: dmix_core::Error) -> CliError {
    use dmix_core::Error as E;
    match e {
        E::Degenerate(_) | E::NonFinite(_) | E::RankCollapse(_) => {
            CliError::NotConverged(e.to_string())
        }
        _ => CliError::Input(e.to_string()),
    }
}

fn point_rows(sol: &SolutionFile, with_heights: bool) -> Vec<Vec<f64>> {
    let dim = sol.mixture.dim();
    let heights = pwc::heights(dim, sol.mixture.weights(), &sol.diameters);
    (0..sol.mixture.len())
        .map(|i| {
            let mut row = sol.mixture.location(i).to_vec();
            row.push(sol.diameters[i]);
            row.push(sol.mixture.weights()[i]);
            if with_heights {
                row.push(heights[i]);
            }
            row
        })
        .collect()
}

fn point_header(dim: usize, with_heights: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    h.extend(["d".into(), "w".into()]);
    if with_heights {
        h.push("h".into());
    }
    h
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let config = resolve(args)?;
    config
        .problem
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let report = dma::solve(&config.problem, config.method).map_err(solve_error)?;
    let solution = SolutionFile::new(&config.problem, config.method, report);

    let dir = &args.output_dir;
    output_dir(dir)?;
    let path = dir.join("solution.json");
    out(&path, write_json(&path, &solution))?;
    let path = dir.join("points.csv");
    out(
        &path,
        write_csv(
            &path,
            &point_header(solution.mixture.dim(), false),
            point_rows(&solution, false),
        ),
    )?;
    let path = dir.join("pwc.csv");
    out(
        &path,
        write_csv(
            &path,
            &point_header(solution.mixture.dim(), true),
            point_rows(&solution, true),
        ),
    )?;
    let path = dir.join("manifest.json");
    out(&path, write_json(&path, &config.manifest))?;

    println!(
        "{:?} via {:?}: L={} residual={} entropy={}",
        solution.case,
        solution.strategy,
        solution.components,
        float(solution.residual),
        solution.entropy.map_or("none".into(), float)
    );
    if solution.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(
            solution
                .message
                .unwrap_or_else(|| "solver did not converge".into()),
        ))
    }
}

fn moments_of(path: &Path, order: u32) -> Result<MomentTable, CliError> {
    let bytes = read(path)?;
    let value: serde_json::Value = parse(path, &bytes)?;
    if value.get("kind").is_none() && value.get("mixture").is_some() {
        let sol: SolutionFile = parse(path, &bytes)?;
        return Ok(dirac_moments(&sol.mixture, order));
    }
    let spec: DensitySpec =
        serde_json::from_value(value).map_err(|e| input_err(path.display(), e))?;
    spec.moments(order)
        .map_err(|e| input_err(path.display(), e))
}

pub fn cmd_moments(args: &MomentsArgs) -> Result<(), CliError> {
    let table = moments_of(&args.input, args.order)?;
    output_dir(&args.output_dir)?;
    let path = args.output_dir.join("moments.json");
    out(&path, write_json(&path, &table))?;
    println!("{} moments up to order {}", table.len(), table.order());
    Ok(())
}

fn reference_of(args: &EvalArgs) -> Result<Option<Reference>, CliError> {
    if let Some(name) = &args.preset {
        let preset = eval::preset(name).map_err(|e| CliError::Input(e.to_string()))?;
        return Ok(Some(preset.reference().clone()));
    }
    if let Some(path) = &args.reference {
        let spec: DensitySpec = parse(path, &read(path)?)?;
        return spec
            .reference()
            .map(Some)
            .map_err(|e| input_err(path.display(), e));
    }
    Ok(None)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let sol: SolutionFile = parse(&args.solution, &read(&args.solution)?)?;
    let dm = &sol.mixture;
    let dim = dm.dim();
    if sol.diameters.len() != dm.len() || sol.target.dim() != dim {
        return Err(CliError::Input(format!(
            "{}: inconsistent dimensions",
            args.solution.display()
        )));
    }
    let reference = reference_of(args)?.filter(|r| !matches!(r, Reference::None));
    if reference.is_some() && dim != 1 {
        return Err(CliError::Input(format!(
            "reference is scalar but the solution has dimension {dim}"
        )));
    }
    let actual = dirac_moments(dm, sol.target.order());
    let (res, norm) =
        residual(&actual, &sol.target, None).map_err(|e| CliError::Input(e.to_string()))?;
    let verdict = pwc::check_feasible(dim, dm.locations(), &sol.diameters, sol.options.eps_slack)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let entropy = sol
        .diameters
        .iter()
        .all(|d| *d > 0.0)
        .then(|| pwc::entropy(dim, dm.weights(), &sol.diameters));
    let cvm = match &reference {
        Some(r) => Some(
            r.cvm_distance(dm)
                .map_err(|e| CliError::Input(e.to_string()))?,
        ),
        None => None,
    };
    let report = EvalFile {
        residual: norm,
        max_abs_residual: res.iter().fold(0.0, |m, (_, v)| m.max(v.abs())),
        entropy,
        cvm,
        feasible: verdict.feasible,
        nonpositive: verdict.nonpositive,
        colliding: verdict.colliding,
        reference: reference.clone(),
    };

    output_dir(&args.output_dir)?;
    let path = args.output_dir.join("eval.json");
    out(&path, write_json(&path, &report))?;
    if dim == 1 {
        let steps = eval::ecdf_1d(dm).map_err(|e| CliError::Input(e.to_string()))?;
        let path = args.output_dir.join("ecdf.csv");
        out(
            &path,
            write_csv(
                &path,
                &["x".into(), "F".into()],
                steps.iter().map(|&(x, f)| vec![x, f]),
            ),
        )?;
        if let Some(r) = &reference {
            let grid = eval::reference_grid(dm).map_err(|e| CliError::Input(e.to_string()))?;
            let path = args.output_dir.join("reference_cdf.csv");
            let rows = grid.iter().map(|&x| vec![x, r.cdf(x).unwrap_or(f64::NAN)]);
            out(&path, write_csv(&path, &["x".into(), "F".into()], rows))?;
        }
    }
    println!(
        "residual={} feasible={} cvm={}",
        float(report.residual),
        report.feasible,
        report.cvm.map_or("none".into(), float)
    );
    Ok(())
}
