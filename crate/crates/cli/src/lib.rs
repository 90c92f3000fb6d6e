//! Command-line front end: argument and config handling, command dispatch and
//! report emission. [`run`] is the whole program minus process exit.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

pub mod commands;
pub mod report;

pub use report::{Format, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

pub const CONFIG_ENV: &str = "LATTICE_UC_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "lattice-uc", version, about = "Discrete harmonic functions on cubic lattices")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Report format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file with default values for any flag.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve Dirichlet problems on the unit cube with the direct solver and
    /// with the Poisson kernel, and compare.
    Solve(SolveArgs),
    /// Delta property, harmonicity and eigenvalue bound of the Poisson kernel.
    KernelCheck(KernelArgs),
    /// Validate the three-cubes inequality on sampled harmonic functions.
    ThreeCubes(ThreeCubesArgs),
    /// Extend harmonic cube data to a discrete harmonic polynomial.
    Extend(ExtendArgs),
    /// Growth of the alternating-sign example and the mesh-term sandwich.
    Counterexample(CounterArgs),
    /// Chebyshev and grid-constrained interpolation nodes.
    NodesCheck(NodesArgs),
}

#[derive(Debug, Args, Default)]
pub struct SolveArgs {
    #[arg(long = "n")]
    pub dim: Option<usize>,
    #[arg(long = "N")]
    pub mesh: Option<u32>,
    /// Number of random boundary datasets.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest accepted relative discrepancy.
    #[arg(long)]
    pub tol: Option<f64>,
    /// uniform, low-frequency, one-face or constant.
    #[arg(long)]
    pub law: Option<String>,
    /// Boundary-data JSON file; replaces the random datasets.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct KernelArgs {
    #[arg(long = "n")]
    pub dim: Option<usize>,
    #[arg(long = "N")]
    pub mesh: Option<u32>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct ThreeCubesArgs {
    #[arg(long = "n")]
    pub dim: Option<usize>,
    #[arg(long = "N")]
    pub mesh: Option<u32>,
    /// Inner half-width; a decimal or `p/q`.
    #[arg(long = "r", value_parser = parse_real)]
    pub r: Option<f64>,
    /// Middle half-width; a decimal or `p/q`.
    #[arg(long = "R", value_parser = parse_real)]
    pub big_r: Option<f64>,
    /// Validation samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Calibration samples used to fit `A`.
    #[arg(long)]
    pub calibrate: Option<usize>,
    /// Fixed constant `A`; skips calibration.
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub law: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ExtendArgs {
    #[arg(long = "n")]
    pub dim: Option<usize>,
    /// Half-width of the cube `K_N`.
    #[arg(long = "N")]
    pub half: Option<i64>,
    /// Number of random harmonic cubes.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cube-values JSON file; replaces the random cubes.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// extrapolate or zero.
    #[arg(long)]
    pub padding: Option<String>,
    /// Cap on total coefficient bits.
    #[arg(long)]
    pub bit_cap: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct CounterArgs {
    /// Short half-side of the rectangle.
    #[arg(long = "M")]
    pub short: Option<i64>,
    /// Long half-side of the rectangle.
    #[arg(long = "N")]
    pub long: Option<i64>,
    /// Largest square half-width measured; defaults to N.
    #[arg(long)]
    pub k_max: Option<i64>,
    #[arg(long = "r", value_parser = parse_real)]
    pub r: Option<f64>,
    #[arg(long = "R", value_parser = parse_real)]
    pub big_r: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct NodesArgs {
    /// Largest node count checked.
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

/// A decimal or an exact fraction `p/q`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            p / q
        }
        None => s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Real {
    Num(f64),
    Text(String),
}

impl Real {
    fn value(&self) -> Result<f64, String> {
        match self {
            Real::Num(v) => Ok(*v),
            Real::Text(s) => parse_real(s),
        }
    }
}

/// Defaults read from a TOML file; keys mirror the long flag names.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub(crate) format: Option<Format>,
    pub(crate) out: Option<PathBuf>,
    pub(crate) workers: Option<usize>,
    pub(crate) n: Option<usize>,
    #[serde(rename = "N")]
    pub(crate) big_n: Option<i64>,
    #[serde(rename = "M")]
    pub(crate) big_m: Option<i64>,
    pub(crate) r: Option<Real>,
    #[serde(rename = "R")]
    pub(crate) big_r: Option<Real>,
    pub(crate) samples: Option<usize>,
    pub(crate) calibrate: Option<usize>,
    #[serde(rename = "A")]
    pub(crate) a: Option<f64>,
    pub(crate) seed: Option<u64>,
    pub(crate) tol: Option<f64>,
    pub(crate) law: Option<String>,
    pub(crate) input: Option<PathBuf>,
    pub(crate) padding: Option<String>,
    pub(crate) bit_cap: Option<u64>,
    pub(crate) k_max: Option<i64>,
    pub(crate) m_max: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub(crate) fn r(&self) -> Result<Option<f64>, String> {
        self.r.as_ref().map(Real::value).transpose()
    }

    pub(crate) fn big_r(&self) -> Result<Option<f64>, String> {
        self.big_r.as_ref().map(Real::value).transpose()
    }

    pub(crate) fn mesh(&self) -> Result<Option<u32>, String> {
        self.big_n
            .map(|v| u32::try_from(v).map_err(|_| format!("config N = {v} is out of range")))
            .transpose()
    }
}

/// Error carrying its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl From<lattice_uc::Error> for Failure {
    fn from(e: lattice_uc::Error) -> Self {
        use lattice_uc::Error as E;
        let code = match &e {
            E::Invalid(_) | E::OutOfBox { .. } | E::Parse(_) => EXIT_USAGE,
            E::Data(_) => EXIT_DATA,
            E::Resource(_) | E::NoConvergence { .. } => EXIT_RESOURCE,
            E::Internal(_) => EXIT_VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// Rendered report when it was not written to `--out`.
    pub stdout: String,
    pub stderr: String,
    pub report: Option<Report>,
}

/// Flag value, else config-file value, else default.
pub(crate) fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let (stdout, stderr) = if code == EXIT_OK { (text, String::new()) } else { (String::new(), text) };
            return Outcome { code, stdout, stderr, report: None };
        }
    };
    match execute(cli) {
        Ok(o) => o,
        Err(f) => Outcome {
            code: f.code,
            stdout: String::new(),
            stderr: format!("error: {}\n", f.message),
            report: None,
        },
    }
}

fn execute(cli: Cli) -> Result<Outcome, Failure> {
    let file = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
            FileConfig::parse(&text).map_err(|e| Failure::usage(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let format = pick(cli.common.format, file.format, Format::Json);
    let out = cli.common.out.clone().or(file.out.clone());
    let workers = cli.common.workers.or(file.workers);
    if workers == Some(0) {
        return Err(Failure::usage("--workers must be at least 1"));
    }

    let start = Instant::now();
    let dispatch = || commands::dispatch(&cli.command, &file);
    let (mut report, code) = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Failure { code: EXIT_RESOURCE, message: e.to_string() })?
            .install(dispatch)?,
        None => dispatch()?,
    };
    if cli.common.timing {
        report.timing = Some(start.elapsed().as_secs_f64());
    }
    let text = report.render(format);
    let stdout = match out {
        Some(path) => {
            std::fs::write(&path, &text)
                .map_err(|e| Failure { code: EXIT_RESOURCE, message: format!("cannot write {}: {e}", path.display()) })?;
            String::new()
        }
        None => text,
    };
    let stderr = if code == EXIT_VALIDATION {
        format!("validation failed: see summary of the {} report\n", report.command)
    } else {
        String::new()
    };
    Ok(Outcome { code, stdout, stderr, report: Some(report) })
}
