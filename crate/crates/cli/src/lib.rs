//! Command-line front end: `transform`, `bench`, `perf` and `tolerance`.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 malformed input file,
//! 3 invalid argument or under-resolved grid, 4 calibration failure,
//! 5 precision tolerance exceeded.

pub mod tensor_file;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use ft3d_bench::{compare_against_fixture, run_bench, BenchOptions};
use ft3d_core::perfmodel::{self, Measurement};
use ft3d_core::tolerance::{self, SweepRow};
use ft3d_core::{Direction, Error, GridSpec, Plan, PrecisionSpec};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::tensor_file::{FormatError, TensorFile};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest accepted single-vs-double relative energy deviation.
pub const TOLERANCE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Calibration(String),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Format(_) => 2,
            CliError::Argument(_) => 3,
            CliError::Calibration(_) => 4,
            CliError::Tolerance(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Calibration(_) => CliError::Calibration(e.to_string()),
            Error::Table(_) => CliError::Format(e.to_string()),
            _ => CliError::Argument(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(io) => CliError::Io(io.to_string()),
            FormatError::UnsupportedEdge(_) => CliError::Argument(e.to_string()),
            other => CliError::Format(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "ft3d", version, about = "Precision-parameterized 3D FFT toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward or inverse 3D FFT of a tensor file.
    Transform(TransformArgs),
    /// Time the forward transform over several sizes.
    Bench(BenchArgs),
    /// Fit the latency model to a timing table and predict other sizes.
    Perf(PerfArgs),
    /// Hartree energy of a Gaussian charge under several precisions.
    Tolerance(ToleranceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionKind {
    Double,
    Single,
    Custom,
}

#[derive(Debug, Args)]
pub struct PrecisionArgs {
    /// Arithmetic precision.
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionKind>,
    /// Significand width for `--precision custom` (1..=52).
    #[arg(long)]
    pub mantissa_bits: Option<u8>,
}

impl PrecisionArgs {
    fn resolve(&self, default: PrecisionSpec) -> Result<PrecisionSpec, CliError> {
        match (self.precision, self.mantissa_bits) {
            (None, None) => Ok(default),
            (None, Some(_)) => Err(CliError::Argument("--mantissa-bits requires --precision custom".into())),
            (Some(PrecisionKind::Double), None) => Ok(PrecisionSpec::Double),
            (Some(PrecisionKind::Single), None) => Ok(PrecisionSpec::Single),
            (Some(PrecisionKind::Custom), Some(bits)) => Ok(PrecisionSpec::custom(bits)?),
            (Some(PrecisionKind::Custom), None) => {
                Err(CliError::Argument("--precision custom requires --mantissa-bits".into()))
            }
            (Some(_), Some(_)) => Err(CliError::Argument("--mantissa-bits only applies to --precision custom".into())),
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("direction").required(true).args(["forward", "inverse"])))]
pub struct TransformArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub inverse: bool,
    /// Defaults to the precision recorded in the input file.
    #[command(flatten)]
    pub precision: PrecisionArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub sizes: Vec<usize>,
    /// Defaults to single precision.
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[arg(long, default_value_t = ft3d_bench::DEFAULT_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write results as a timing table (`n,kernel_ms,pcie_ms,fftw_ms`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Compare against a timing table; without a path the bundled table is used.
    #[arg(long, num_args = 0..=1, default_missing_value = "bundled")]
    pub fixture: Option<String>,
    /// Spread the pencils of each phase over worker threads.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct PerfArgs {
    /// Timing table to fit; the bundled table when omitted.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub predict: Vec<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Box edge length.
    #[arg(long = "box", default_value_t = 10.0)]
    pub box_length: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub charge: f64,
    /// Custom mantissa widths to evaluate; double and single when omitted.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<u8>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return ExitCode::from(code);
        }
    };
    match execute(cli.command, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Transform(a) => cmd_transform(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Perf(a) => cmd_perf(&a, out),
        Command::Tolerance(a) => cmd_tolerance(&a, out),
    }
}

/// Intra-transform parallelism requested through `FT3D_THREADS`.
fn env_threads() -> Option<usize> {
    std::env::var("FT3D_THREADS").ok().and_then(|v| v.trim().parse().ok())
}

#[derive(Serialize)]
struct Report<P: Serialize, R: Serialize> {
    tool_version: &'static str,
    command: &'static str,
    params: P,
    results: R,
    #[serde(flatten)]
    extra: serde_json::Value,
}

fn write_report<P: Serialize, R: Serialize>(
    path: &Path,
    command: &'static str,
    params: P,
    results: R,
    extra: serde_json::Value,
) -> Result<(), CliError> {
    let report = Report { tool_version: TOOL_VERSION, command, params, results, extra };
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    tensor_file::write_atomic(path, &bytes).map_err(io_err(path))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn cmd_transform(a: &TransformArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let same_file = match (a.input.canonicalize(), a.output.canonicalize()) {
        (Ok(i), Ok(o)) => i == o,
        _ => false,
    };
    if same_file {
        return Err(CliError::Argument("output must not overwrite the input file".into()));
    }
    let input = TensorFile::read(&a.input)?;
    let precision = a.precision.resolve(input.precision)?;
    let direction = if a.inverse { Direction::Inverse } else { Direction::Forward };
    let n = input.tensor.n();
    let plan = Plan::with_defaults(n, precision)?.with_parallelism(env_threads().is_some_and(|t| t > 1));
    let result = plan.execute(&input.tensor, direction)?;
    TensorFile::new(precision, result).write_atomic(&a.output).map_err(io_err(&a.output))?;
    writeln!(out, "{direction:?} {n}^3 transform at {precision} -> {}", a.output.display()).map_err(out_err)
}

fn check_plan_sizes(sizes: &[usize]) -> Result<(), CliError> {
    if sizes.is_empty() {
        return Err(CliError::Argument("no sizes given".into()));
    }
    for &n in sizes {
        if !n.is_power_of_two() || !(Plan::MIN_N..=Plan::MAX_N).contains(&n) {
            return Err(Error::UnsupportedSize { n, rule: "n must be a power of two in [2, 1024]" }.into());
        }
    }
    Ok(())
}

fn load_fixture(spec: &str) -> Result<Vec<Measurement>, CliError> {
    if spec == "bundled" {
        return Ok(perfmodel::reference_timings());
    }
    let path = Path::new(spec);
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(perfmodel::read_measurements(file)?)
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_plan_sizes(&a.sizes)?;
    if a.iters == 0 {
        return Err(CliError::Argument("--iters must be at least 1".into()));
    }
    let precision = a.precision.resolve(PrecisionSpec::Single)?;
    let fixture = a.fixture.as_deref().map(load_fixture).transpose()?;
    let opts = BenchOptions { precision, iters: a.iters, seed: a.seed, parallel: a.parallel };

    let outcomes = run_bench(&a.sizes, &opts)?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(json!({ "n": f.n, "error": f.error.to_string() })),
        }
    }

    writeln!(out, "{:>6} {:>10} {:>6} {:>12} {:>12} {:>12}", "n", "precision", "iters", "mean_ms", "stddev_ms", "min_ms")
        .map_err(out_err)?;
    for r in &results {
        writeln!(
            out,
            "{:>6} {:>10} {:>6} {:>12.6} {:>12.6} {:>12.6}",
            r.n,
            r.precision.to_string(),
            r.iters,
            r.mean_ms,
            r.stddev_ms,
            r.min_ms
        )
        .map_err(out_err)?;
    }
    let comparison = fixture.as_ref().map(|f| compare_against_fixture(&results, f));
    if let Some(c) = &comparison {
        for row in &c.rows {
            writeln!(
                out,
                "n={} host {:.4} ms | reference kernel {:.2} ms (x{:.2}) | reference FFTW {} ms",
                row.n,
                row.measured_ms,
                row.fixture_kernel_ms,
                row.ratio_vs_kernel,
                row.fixture_fftw_ms.map_or("-".to_string(), |v| v.to_string()),
            )
            .map_err(out_err)?;
        }
        for w in &c.warnings {
            writeln!(out, "warning: {w}").map_err(out_err)?;
        }
    }

    if let Some(path) = &a.report {
        let params = json!({
            "sizes": a.sizes, "precision": precision, "iters": a.iters, "seed": a.seed,
            "parallel": a.parallel, "fixture": a.fixture,
        });
        let extra = json!({
            "metadata": {
                "timing": "monotonic clock; one warm-up run discarded; plan creation and input generation excluded",
                "threads": if a.parallel { env_threads().unwrap_or_else(rayon::current_num_threads) } else { 1 },
            },
            "failures": failures,
            "comparison": comparison,
        });
        write_report(path, "bench", params, &results, extra)?;
    }
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        perfmodel::write_measurements(&mut buf, &ft3d_bench::as_measurements(&results))?;
        tensor_file::write_atomic(path, &buf).map_err(io_err(path))?;
    }
    if !failures.is_empty() {
        return Err(CliError::Argument(format!("{} size(s) failed: {failures:?}", failures.len())));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictionRow {
    n: usize,
    kernel_ms: f64,
    pcie_ms: f64,
    extrapolated: bool,
}

pub fn cmd_perf(a: &PerfArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = match &a.fixture {
        Some(p) => load_fixture(p.to_str().ok_or_else(|| CliError::Argument("non UTF-8 path".into()))?)?,
        None => perfmodel::reference_timings(),
    };
    for &n in &a.predict {
        if !n.is_power_of_two() || n < 8 {
            return Err(CliError::Argument(format!("cannot predict n = {n}: sizes must be powers of two >= 8")));
        }
    }
    let cal = perfmodel::calibrate(&rows)?;
    let cfg = &cal.config;
    writeln!(out, "clock            {:.3} MHz", cfg.clock_hz / 1e6).map_err(out_err)?;
    writeln!(out, "kernel overhead  {:.4} ms", cfg.kernel_overhead_s * 1e3).map_err(out_err)?;
    writeln!(out, "link latency     {:.4} ms", cfg.pcie_latency_s * 1e3).map_err(out_err)?;
    writeln!(out, "link bandwidth   {:.3} GB/s", cfg.pcie_bytes_per_s / 1e9).map_err(out_err)?;
    writeln!(out, "{:>6} {:>12} {:>12} {:>9} {:>12} {:>12} {:>9}", "n", "kernel_ms", "model_ms", "resid", "pcie_ms", "model_ms", "resid")
        .map_err(out_err)?;
    for (k, p) in cal.kernel_residuals.iter().zip(&cal.pcie_residuals) {
        writeln!(
            out,
            "{:>6} {:>12.4} {:>12.4} {:>8.1}% {:>12.4} {:>12.4} {:>8.1}%",
            k.n,
            k.measured_ms,
            k.predicted_ms,
            100.0 * k.relative,
            p.measured_ms,
            p.predicted_ms,
            100.0 * p.relative
        )
        .map_err(out_err)?;
    }

    let (lo, hi) = rows.iter().fold((usize::MAX, 0), |(lo, hi), r| (lo.min(r.n), hi.max(r.n)));
    let predictions: Vec<PredictionRow> = perfmodel::predict_report(&a.predict, cfg)?
        .into_iter()
        .map(|m| PredictionRow {
            n: m.n,
            kernel_ms: m.kernel_ms,
            pcie_ms: m.pcie_ms.unwrap_or_default(),
            extrapolated: m.n < lo || m.n > hi,
        })
        .collect();
    if !predictions.is_empty() {
        writeln!(out, "predicted:").map_err(out_err)?;
        for p in &predictions {
            writeln!(
                out,
                "{:>6} {:>12.4} {:>12.4}{}",
                p.n,
                p.kernel_ms,
                p.pcie_ms,
                if p.extrapolated { "  extrapolated" } else { "" }
            )
            .map_err(out_err)?;
        }
    }
    if let Some(path) = &a.report {
        let params = json!({ "fixture": a.fixture, "predict": a.predict });
        let extra = json!({ "calibration": cal });
        write_report(path, "perf", params, &predictions, extra)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ToleranceRow {
    n: usize,
    box_length: f64,
    sigma: f64,
    precision: PrecisionSpec,
    energy: f64,
    rel_error_vs_double: f64,
}

pub fn cmd_tolerance(a: &ToleranceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = GridSpec::new(a.n, a.box_length)?;
    if !a.n.is_power_of_two() || !(Plan::MIN_N..=Plan::MAX_N).contains(&a.n) {
        return Err(Error::UnsupportedSize { n: a.n, rule: "n must be a power of two in [2, 1024]" }.into());
    }
    let specs: Vec<PrecisionSpec> = if a.sweep.is_empty() {
        vec![PrecisionSpec::Double, PrecisionSpec::Single]
    } else {
        a.sweep.iter().map(|&b| PrecisionSpec::custom(b)).collect::<Result<_, _>>()?
    };
    let mut all = specs.clone();
    if !all.contains(&PrecisionSpec::Single) {
        all.push(PrecisionSpec::Single);
    }
    let sweep = tolerance::precision_sweep(&grid, a.charge, a.sigma, &all)?;
    let single = sweep.iter().find(|r| r.precision == PrecisionSpec::Single).map(|r| r.rel_error_vs_double).unwrap();
    let rows: Vec<ToleranceRow> = sweep
        .iter()
        .filter(|r| specs.contains(&r.precision))
        .map(|r: &SweepRow| ToleranceRow {
            n: a.n,
            box_length: a.box_length,
            sigma: a.sigma,
            precision: r.precision,
            energy: r.energy,
            rel_error_vs_double: r.rel_error_vs_double,
        })
        .collect();

    writeln!(out, "{:>10} {:>22} {:>14}", "precision", "energy", "rel_error").map_err(out_err)?;
    for r in &rows {
        writeln!(out, "{:>10} {:>22.15} {:>14.3e}", r.precision.to_string(), r.energy, r.rel_error_vs_double)
            .map_err(out_err)?;
    }
    let passed = single < TOLERANCE_THRESHOLD;
    writeln!(
        out,
        "single vs double: {single:.3e} ({} threshold {TOLERANCE_THRESHOLD:e})",
        if passed { "within" } else { "EXCEEDS" }
    )
    .map_err(out_err)?;

    if let Some(path) = &a.report {
        let params = json!({
            "n": a.n, "box_length": a.box_length, "sigma": a.sigma, "charge": a.charge, "sweep": a.sweep,
        });
        let extra = json!({ "single_vs_double": single, "threshold": TOLERANCE_THRESHOLD, "passed": passed });
        write_report(path, "tolerance", params, &rows, extra)?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("single vs double energy deviation {single:e} >= {TOLERANCE_THRESHOLD:e}")))
    }
}

/// Applies `FT3D_THREADS` to the global worker pool.
pub fn init_thread_pool() {
    if let Some(threads) = env_threads().filter(|&t| t > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}
