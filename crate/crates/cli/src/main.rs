//! `okernel`: evaluate, diagnose, decompose and fit operator-valued kernels.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage, 3 invalid input,
//! 4 numerical failure.

mod input;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use okernel::dsl::{self, FsLoader};
use okernel::invariant::{self, Recovery, SpectralDensity};
use okernel::learn::{self, Solver};
use okernel::linalg::MatrixFile;
use okernel::quadrature::tensor_box;
use okernel::universality::{self, DiagnosticsReport, Verdict};
use okernel::{spectral, suites, Domain, Kernel};
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Lib(okernel::Error),
    Verification(String),
}

impl From<okernel::Error> for CliError {
    fn from(e: okernel::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Lib(e) if e.is_numerical() => 4,
            CliError::Lib(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Input(s) | CliError::Verification(s) => f.write_str(s),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Block,
    Decoupled,
    Psi,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Block => Solver::Block,
            SolverArg::Decoupled => Solver::Decoupled,
            SolverArg::Psi => Solver::Psi,
        }
    }
}

#[derive(Parser)]
#[command(name = "okernel", version, about = "Operator-valued reproducing kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct KernelArg {
    /// Kernel expression, e.g. "kb(scalar=gauss(sigma=1), b=@B.json)".
    #[arg(short, long = "kernel")]
    kernel: String,
    /// Directory that `@file` references resolve against.
    #[arg(long, default_value = ".")]
    base_dir: PathBuf,
}

impl KernelArg {
    fn build(&self) -> Result<Kernel, CliError> {
        Ok(dsl::compile(&self.kernel, &FsLoader::new(&self.base_dir))?)
    }
}

#[derive(Args, Clone)]
struct OutArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print K(x, t).
    Eval {
        #[command(flatten)]
        kernel: KernelArg,
        /// Comma-separated coordinates of x.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        /// Print re/im columns instead of a+bi.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Block Gram matrix on a point set.
    Gram {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Positivity and universality diagnostics.
    Diag {
        #[command(subcommand)]
        test: DiagCommand,
    },
    /// Mercer decomposition against a discrete measure.
    Mercer {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long)]
        measure: PathBuf,
        /// Relative eigenvalue retention threshold.
        #[arg(long, default_value_t = spectral::RETENTION_TOL)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Tabulate K0(u) = K(0, u) for the kernel of a spectral density.
    Synth {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recover the spectral density of a translation-invariant kernel.
    Density {
        #[command(flatten)]
        kernel: KernelArg,
        /// Characters on Z_n, comma-separated (default: all).
        #[arg(long)]
        characters: Option<String>,
        /// Frequency nodes per axis on R^d.
        #[arg(long, default_value_t = 41)]
        nodes: usize,
        /// Frequency box half-width on R^d.
        #[arg(long, default_value_t = 4.0)]
        half_width: f64,
        /// Spatial quadrature nodes per axis on R^d.
        #[arg(long, default_value_t = 400)]
        grid_nodes: usize,
        #[arg(long, default_value_t = 10.0)]
        grid_half_width: f64,
        /// Negative-eigenvalue clipping tolerance.
        #[arg(long, default_value_t = invariant::DENSITY_PSD_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a regularized least-squares model.
    Fit {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "block")]
        solver: SolverArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict with a fitted model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a named verification suite (or `all`).
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Subcommand)]
enum DiagCommand {
    /// Strict positive definiteness on a point set.
    Spd {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Injectivity of the integral operator of a discrete measure.
    Spectrum {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value_t = universality::INJECTIVITY_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Support of a spectral density.
    Support {
        #[arg(long)]
        density: PathBuf,
        #[arg(long, default_value_t = universality::INJECTIVITY_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("OKERNEL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("okernel: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn report(r: &DiagnosticsReport, out: Option<&Path>) -> Result<(), CliError> {
    output::emit(out, &r.to_json())?;
    match r.verdict {
        Verdict::Fail => Err(CliError::Verification(format!("{}: {} failed", r.kernel, r.test))),
        Verdict::Inconclusive => {
            log::warn!("{}: {} inconclusive", r.kernel, r.test);
            Ok(())
        }
        Verdict::Pass => Ok(()),
    }
}

fn load_density(path: &Path) -> Result<SpectralDensity, CliError> {
    serde_json::from_str(&input::read_file(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Eval { kernel, x, t, format } => {
            let k = kernel.build()?;
            let v = k.eval(&input::point_arg(k.domain(), &x)?, &input::point_arg(k.domain(), &t)?)?;
            let text = match format {
                Some(Format::Csv) => output::csv_rows(&[output::split_entries(&v)])?,
                Some(Format::Json) => pretty(&MatrixFile::from_matrix(&v)),
                None => output::matrix_text(&v),
            };
            output::emit(None, &text)?;
        }
        Command::Gram { kernel, points, out } => {
            let k = kernel.build()?;
            let pts = input::points(k.domain(), &points)?;
            let g = okernel::gram::gram(&k, &pts)?;
            let text = match out.format {
                Format::Json => pretty(&json!({
                    "kernel": k.to_string(),
                    "dim": k.dim(),
                    "points": pts,
                    "gram": MatrixFile::from_matrix(&g.matrix),
                })),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = (0..g.matrix.nrows())
                        .map(|i| output::split_entries(&g.matrix.rows(i, 1).into_owned()))
                        .collect();
                    output::csv_rows(&rows)?
                }
            };
            output::emit(out.out.as_deref(), &text)?;
        }
        Command::Diag { test } => match test {
            DiagCommand::Spd { kernel, points, tol, out } => {
                let k = kernel.build()?;
                let pts = input::points(k.domain(), &points)?;
                report(&universality::spd_test(&k, &pts, tol)?, out.as_deref())?;
            }
            DiagCommand::Spectrum { kernel, measure, tol, out } => {
                let k = kernel.build()?;
                let mu = input::measure(k.domain(), &measure)?;
                report(&universality::lmu_report(&k, &mu, tol)?, out.as_deref())?;
            }
            DiagCommand::Support { density, tol, out } => {
                let sd = load_density(&density)?;
                report(&universality::density_support_verdict(&sd, tol), out.as_deref())?;
            }
        },
        Command::Mercer { kernel, measure, tol, out } => {
            let k = kernel.build()?;
            let mu = input::measure(k.domain(), &measure)?;
            let dec = spectral::mercer(&k, &mu, tol)?;
            let text = match out.format {
                Format::Json => pretty(&dec),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = (0..dec.rank())
                        .map(|i| {
                            let mut row = vec![i.to_string(), output::real(dec.eigenvalues[i])];
                            for v in dec.eigenfunction(i) {
                                row.extend(output::split_vector(&v));
                            }
                            row
                        })
                        .collect();
                    output::csv_rows(&rows)?
                }
            };
            output::emit(out.out.as_deref(), &text)?;
        }
        Command::Synth { density, points, out } => {
            let sd = load_density(&density)?;
            let k = invariant::synth_kernel(&sd);
            let domain = k.domain();
            let pts = input::points(domain, &points)?;
            let origin = match domain {
                Domain::Real { dim } => okernel::Point::Real(vec![0.0; dim]),
                Domain::Cyclic { n } => okernel::Point::residue(0, n)?,
                d => return Err(CliError::Input(format!("densities on {d} are not supported"))),
            };
            let values = pts.iter().map(|u| k.eval(&origin, u)).collect::<okernel::Result<Vec<_>>>()?;
            let text = match out.format {
                Format::Json => pretty(&json!({
                    "kernel": k.to_string(),
                    "table": pts.iter().zip(&values).map(|(u, v)| json!({
                        "u": u,
                        "value": MatrixFile::from_matrix(v),
                    })).collect::<Vec<_>>(),
                })),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = pts
                        .iter()
                        .zip(&values)
                        .map(|(u, v)| {
                            let mut row = output::point(u);
                            row.extend(output::split_entries(v));
                            row
                        })
                        .collect();
                    output::csv_rows(&rows)?
                }
            };
            output::emit(out.out.as_deref(), &text)?;
        }
        Command::Density {
            kernel,
            characters,
            nodes,
            half_width,
            grid_nodes,
            grid_half_width,
            tol,
            out,
        } => {
            let k = kernel.build()?;
            let recovery = match k.domain() {
                Domain::Cyclic { .. } => Recovery::Cyclic {
                    characters: characters
                        .map(|s| {
                            s.split(',')
                                .map(|c| c.trim().parse::<u64>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|e| CliError::Input(format!("--characters: {e}")))
                        })
                        .transpose()?,
                },
                Domain::Real { dim } => Recovery::Real {
                    grid: tensor_box(grid_nodes, grid_half_width, dim)?,
                    frequencies: tensor_box(nodes, half_width, dim)?,
                },
                d => return Err(CliError::Input(format!("density recovery needs Z_n or R^d, found {d}"))),
            };
            let sd = invariant::density_from_kernel(&k, &recovery, tol)?;
            output::emit(out.as_deref(), &sd.to_json())?;
        }
        Command::Fit {
            kernel,
            data,
            lambda,
            solver,
            out,
        } => {
            let k = kernel.build()?;
            let set = input::training(k.domain(), k.dim(), &data)?;
            let model = learn::fit(&k, &set, lambda, solver.into())?.with_expr(kernel.kernel.clone());
            if model.condition > learn::CONDITION_WARN {
                log::warn!("system condition estimate {:.3e}", model.condition);
            }
            let base = std::fs::canonicalize(&kernel.base_dir)
                .map_err(|e| CliError::Input(format!("{}: {e}", kernel.base_dir.display())))?;
            let file = model.to_file(Some(base.display().to_string()))?;
            output::emit(out.as_deref(), &pretty(&file))?;
        }
        Command::Predict { model, points, out } => {
            let text = input::read_file(&model)?;
            let base = model.parent().map(Path::to_path_buf).unwrap_or_default();
            let m = dsl::load_model(&text, &FsLoader::new(base))?;
            let pts = input::points(m.kernel.domain(), &points)?;
            let preds = pts.iter().map(|p| learn::predict(&m, p)).collect::<okernel::Result<Vec<_>>>()?;
            let text = match out.format {
                Format::Json => pretty(&json!(pts
                    .iter()
                    .zip(&preds)
                    .map(|(p, y)| json!({
                        "x": p,
                        "y": y.iter().map(|z| output::complex(*z)).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>())),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = pts
                        .iter()
                        .zip(&preds)
                        .map(|(p, y)| {
                            let mut row = output::point(p);
                            row.extend(output::split_vector(y));
                            row
                        })
                        .collect();
                    output::csv_rows(&rows)?
                }
            };
            output::emit(out.out.as_deref(), &text)?;
        }
        Command::Verify { suite, seed, format } => {
            let reports = suites::run_named(&suite, seed).map_err(|e| match e {
                okernel::Error::InvalidParameter(msg) => CliError::Usage(msg),
                e => CliError::Lib(e),
            })?;
            if format == Some(Format::Json) {
                output::emit(None, &pretty(&reports))?;
            } else {
                let mut text = String::new();
                for r in &reports {
                    text.push_str(&r.summary());
                    text.push('\n');
                    for c in &r.checks {
                        if c.timing {
                            eprintln!("  {}: {c}", r.suite);
                        } else {
                            text.push_str(&format!("  {c}\n"));
                        }
                    }
                }
                output::emit(None, &text)?;
            }
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(format!("failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}
