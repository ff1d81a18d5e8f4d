//! The `glstat` command-line front end.
//!
//! Exit codes: 0 on success, 1 on domain and I/O errors, 2 on usage errors
//! (bad flags, unknown names, invalid parameter values, malformed config).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{GlError, Result};
use crate::glstat::{Estimator, GLSpecConfig, QMode};
use crate::kernels::builtin_kernel;
use crate::lrv::{gl_confidence_interval, lrv_gl, lrv_ustat, BandwidthPolicy, LrvConfig, WeightFunction};
use crate::mc::{run_experiment, write_report, ExperimentConfig};
use crate::processes::{
    check_egarch_conditions, write_path_csv, Garch11Params, InnovationModel, ProcessModel, SimConfig,
    DEFAULT_BURN_IN,
};
use crate::ustat::{Normalization, Sample};
use crate::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "glstat", version, about = "GL-statistics, long-run variances and dependent-data simulation")]
pub struct Cli {
    /// Echo every default that shaped the result to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point estimate of a scale estimator.
    Estimate(EstimateArgs),
    /// Long-run variance of a U-statistic kernel or of a GL-statistic.
    Lrv(LrvArgs),
    /// Asymptotic confidence interval of a GL-statistic.
    Ci(CiArgs),
    /// Simulate a path and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EstimatorName {
    Gini,
    GiniOs,
    Q,
    C,
    Lms,
    Gl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum QModeArg {
    /// Fast counting search for m = 3, full enumeration otherwise.
    Exact,
    Enumerate,
    Subsampled,
    Auto,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Single-column CSV, with header `x` or headerless.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    estimator: EstimatorName,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    /// Constant of the C estimator.
    #[arg(long, default_value_t = 1.0)]
    c_alpha: f64,
    #[arg(long, value_enum, default_value_t = QModeArg::Exact)]
    q_mode: QModeArg,
    #[arg(long, default_value_t = 2_000_000)]
    subsample_size: usize,
    /// Seed of the random subsets drawn by subsampled Q.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// GL spec file (TOML) for `--estimator gl`.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum WeightArg {
    Bartlett,
    Parzen,
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NormalizationArg {
    Combinatorial,
    PaperLiteral,
}

#[derive(Debug, Args)]
struct LrvOptions {
    #[arg(long, value_enum, default_value_t = WeightArg::Bartlett)]
    kernel_weight: WeightArg,
    /// `auto` for floor(n^{1/3}), or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    bandwidth: BandwidthPolicy,
    /// Constant c of the density half-width c * IQR * n^{-1/5}.
    #[arg(long, default_value_t = 0.5)]
    density_halfwidth: f64,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Combinatorial)]
    normalization: NormalizationArg,
}

impl LrvOptions {
    fn config(&self) -> LrvConfig {
        LrvConfig {
            weight: match self.kernel_weight {
                WeightArg::Bartlett => WeightFunction::Bartlett,
                WeightArg::Parzen => WeightFunction::Parzen,
                WeightArg::Truncated => WeightFunction::Truncated,
            },
            bandwidth: self.bandwidth,
            density_halfwidth: self.density_halfwidth,
            normalization: match self.normalization {
                NormalizationArg::Combinatorial => Normalization::Combinatorial,
                NormalizationArg::PaperLiteral => Normalization::PaperLiteral,
            },
        }
    }
}

fn parse_bandwidth(s: &str) -> std::result::Result<BandwidthPolicy, String> {
    if s == "auto" {
        return Ok(BandwidthPolicy::Auto);
    }
    match s.parse::<f64>() {
        Ok(b) if b > 0.0 && b.is_finite() => Ok(BandwidthPolicy::Fixed { b }),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["kernel", "estimator"]))]
struct LrvArgs {
    #[command(flatten)]
    input: InputArgs,
    /// U-statistic kernel (gini_abs_diff, identity, min_pairwise, range).
    #[arg(long, conflicts_with = "estimator")]
    kernel: Option<String>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorName>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c_alpha: f64,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    lrv: LrvOptions,
}

#[derive(Debug, Args)]
struct CiArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    lrv: LrvOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Iid,
    Ar1,
    Garch11,
    Egarch,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Simulation file (TOML) with a `[model]` table and optional n, seed, burn_in.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// AR(1) coefficient for `--model ar1`.
    #[arg(long)]
    rho: Option<f64>,
    /// Built-in EGARCH scenario for `--model egarch` without a config.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    scenario: u8,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Simulation file accepted by `simulate --config`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    n: Option<usize>,
    seed: Option<u64>,
    burn_in: Option<usize>,
    model: ProcessModel,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    verbose: bool,
}

impl Io<'_> {
    fn echo(&mut self, line: impl AsRef<str>) -> Result<()> {
        if self.verbose {
            writeln!(self.err, "# {}", line.as_ref())?;
        }
        Ok(())
    }
}

/// Caps rayon's global pool from `GLSTAT_THREADS` (0 or unset: automatic).
pub fn configure_threads() -> Option<usize> {
    let n: usize = std::env::var("GLSTAT_THREADS").ok()?.trim().parse().ok()?;
    if n == 0 {
        return None;
    }
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Some(n)
}

fn is_usage_error(e: &GlError) -> bool {
    matches!(
        e,
        GlError::Argument(_) | GlError::UnknownKernel(_) | GlError::UnknownEstimator(_) | GlError::Config(_)
    )
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let threads = configure_threads();
    let mut io = Io {
        out,
        err,
        verbose: cli.verbose,
    };
    let result = io
        .echo(format!(
            "threads = {}",
            threads.map_or_else(|| format!("auto ({})", rayon::current_num_threads()), |t| t.to_string())
        ))
        .and_then(|_| dispatch(cli.command, &mut io));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            if is_usage_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, io: &mut Io<'_>) -> Result<()> {
    match command {
        Command::Estimate(a) => estimate(a, io),
        Command::Lrv(a) => lrv(a, io),
        Command::Ci(a) => ci(a, io),
        Command::Simulate(a) => simulate(a, io),
        Command::Experiment(a) => experiment(a, io),
    }
}

/// Reads a single-column CSV, with or without an `x` header.
pub fn read_sample(path: &Path) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 1 {
            return Err(GlError::Domain(format!(
                "{}: line {} has {} columns, expected 1",
                path.display(),
                i + 1,
                record.len()
            )));
        }
        let field = &record[0];
        if field.is_empty() {
            continue;
        }
        if i == 0 && field.eq_ignore_ascii_case("x") {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| GlError::Domain(format!("{}: line {}: `{field}` is not a number", path.display(), i + 1)))?;
        values.push(v);
    }
    Sample::new(values)
}

fn read_spec(path: Option<&Path>) -> Result<GLSpecConfig> {
    let path = path.ok_or_else(|| GlError::Argument("--estimator gl needs --spec <file>".into()))?;
    toml::from_str(&fs::read_to_string(path)?).map_err(|e| GlError::Config(format!("{}: {e}", path.display())))
}

fn build_estimator(
    name: EstimatorName,
    alpha: Option<f64>,
    m: Option<usize>,
    c_alpha: f64,
    q_mode: QModeArg,
    subsample_size: usize,
    spec: Option<&Path>,
) -> Result<Estimator> {
    Ok(match name {
        EstimatorName::Gini => Estimator::Gini,
        EstimatorName::GiniOs => Estimator::GiniOs,
        EstimatorName::Lms => Estimator::Lms,
        EstimatorName::C => Estimator::C {
            alpha: alpha.unwrap_or(0.25),
            c_alpha,
        },
        EstimatorName::Q => {
            let m = m.unwrap_or(3);
            let mode = match q_mode {
                QModeArg::Exact if m == 3 => QMode::FastExact,
                QModeArg::Exact | QModeArg::Enumerate => QMode::Enumerate,
                QModeArg::Subsampled => QMode::Subsampled { subsample_size },
                QModeArg::Auto => QMode::Auto { subsample_size },
            };
            Estimator::Q {
                m,
                alpha: alpha.unwrap_or(0.5),
                mode,
            }
        }
        EstimatorName::Gl => Estimator::Gl(read_spec(spec)?.build()?),
    })
}

impl EstimatorArgs {
    fn build(&self) -> Result<Estimator> {
        build_estimator(
            self.estimator,
            self.alpha,
            self.m,
            self.c_alpha,
            self.q_mode,
            self.subsample_size,
            self.spec.as_deref(),
        )
    }
}

fn estimate(a: EstimateArgs, io: &mut Io<'_>) -> Result<()> {
    let est = a.estimator.build()?;
    let sample = read_sample(&a.input.input)?;
    io.echo(format!("estimator = {}: {}", est.name(), est.conventions()))?;
    io.echo(format!("n = {}", sample.len()))?;
    let mut rng = crate::processes::substream(a.estimator.seed, 0, 0);
    let value = est.evaluate_with_rng(&sample, &mut rng)?;
    writeln!(io.out, "{value}")?;
    Ok(())
}

fn echo_lrv(io: &mut Io<'_>, cfg: &LrvConfig, n: usize) -> Result<()> {
    io.echo(format!("lag weight = {}", cfg.weight.name()))?;
    io.echo(format!(
        "bandwidth = {:?} -> {}",
        cfg.bandwidth,
        cfg.bandwidth.bandwidth(n).map(|b| b.to_string()).unwrap_or_else(|e| e.to_string())
    ))?;
    io.echo(format!("density half-width constant = {}", cfg.density_halfwidth))?;
    io.echo(format!("normalization = {:?}", cfg.normalization))?;
    io.echo("autocovariance denominator = 1/n at every lag")
}

fn lrv(a: LrvArgs, io: &mut Io<'_>) -> Result<()> {
    let cfg = a.lrv.config();
    let sample = read_sample(&a.input.input)?;
    if let Some(kernel) = &a.kernel {
        let mut params = std::collections::BTreeMap::new();
        if let Some(m) = a.m {
            params.insert("m".to_string(), m as f64);
        }
        let kernel = builtin_kernel(kernel, &params)?;
        echo_lrv(io, &cfg, sample.len())?;
        let b = cfg.bandwidth.bandwidth(sample.len())?;
        let s2 = lrv_ustat(&sample, &kernel, &cfg)?;
        writeln!(io.out, "sigma2 = {s2}")?;
        writeln!(io.out, "sigma2_scaled = {}", (kernel.m() * kernel.m()) as f64 * s2)?;
        writeln!(io.out, "bandwidth = {b}")?;
        return Ok(());
    }
    let name = a.estimator.expect("clap enforces the target group");
    let est = build_estimator(name, a.alpha, a.m, a.c_alpha, QModeArg::Enumerate, 0, a.spec.as_deref())?;
    let spec = est.gl_spec(sample.len())?;
    io.echo(format!("estimator = {}: {}", est.name(), est.conventions()))?;
    echo_lrv(io, &cfg, sample.len())?;
    let r = lrv_gl(&sample, &spec, &cfg)?;
    writeln!(io.out, "sigma2_gl = {}", r.sigma2_gl)?;
    writeln!(io.out, "sigma2_raw = {}", r.sigma2_raw)?;
    writeln!(io.out, "sigma2_scaled = {}", r.sigma2_scaled)?;
    writeln!(io.out, "bandwidth = {}", r.bandwidth_used)?;
    writeln!(io.out, "clamped = {}", r.clamped)?;
    for (p, d) in &r.density_estimates {
        writeln!(io.out, "density[p={p}] = {d}")?;
    }
    Ok(())
}

fn ci(a: CiArgs, io: &mut Io<'_>) -> Result<()> {
    let cfg = a.lrv.config();
    let est = a.estimator.build()?;
    let sample = read_sample(&a.input.input)?;
    let spec = est.gl_spec(sample.len())?;
    io.echo(format!("estimator = {}: {}", est.name(), est.conventions()))?;
    echo_lrv(io, &cfg, sample.len())?;
    let ci = gl_confidence_interval(&sample, &spec, &cfg, a.level)?;
    writeln!(io.out, "estimate = {}", ci.estimate)?;
    writeln!(io.out, "lo = {}", ci.lo)?;
    writeln!(io.out, "hi = {}", ci.hi)?;
    writeln!(io.out, "level = {}", ci.level)?;
    writeln!(io.out, "sigma2_gl = {}", ci.variance.sigma2_gl)?;
    writeln!(io.out, "clamped = {}", ci.variance.clamped)?;
    Ok(())
}

fn model_from_flag(model: ModelArg, a: &SimulateArgs) -> Result<ProcessModel> {
    Ok(match model {
        ModelArg::Iid => ProcessModel::Iid,
        ModelArg::Ar1 => ProcessModel::Ar1 {
            rho: a.rho.ok_or_else(|| GlError::Argument("--model ar1 needs --rho".into()))?,
        },
        ModelArg::Garch11 => ProcessModel::Garch11 {
            params: Garch11Params {
                alpha0: 0.1,
                alpha1: 0.1,
                beta1: 0.8,
            },
            innovations: InnovationModel::IidGaussian,
        },
        ModelArg::Egarch => {
            if a.scenario == 2 {
                ProcessModel::egarch_scenario2()
            } else {
                ProcessModel::egarch_scenario1()
            }
        }
    })
}

fn simulate(a: SimulateArgs, io: &mut Io<'_>) -> Result<()> {
    let file = match &a.config {
        Some(path) => Some(
            toml::from_str::<SimulateFile>(&fs::read_to_string(path)?)
                .map_err(|e| GlError::Config(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let model = match (&file, a.model) {
        (Some(f), Some(flag)) if f.model.name() != model_name(flag) => {
            return Err(GlError::Argument(format!(
                "--model {} disagrees with the config model `{}`",
                model_name(flag),
                f.model.name()
            )))
        }
        (Some(f), _) => f.model.clone(),
        (None, Some(flag)) => model_from_flag(flag, &a)?,
        (None, None) => return Err(GlError::Argument("simulate needs --model or --config".into())),
    };
    let n = a
        .n
        .or(file.as_ref().and_then(|f| f.n))
        .ok_or_else(|| GlError::Argument("simulate needs --n".into()))?;
    let sim = SimConfig {
        n,
        burn_in: a.burn_in.or(file.as_ref().and_then(|f| f.burn_in)).unwrap_or(DEFAULT_BURN_IN),
        seed: a.seed.or(file.as_ref().and_then(|f| f.seed)).unwrap_or(0),
        model,
    };
    sim.model.validate()?;
    io.echo(format!("model = {:?}", sim.model))?;
    io.echo(format!("n = {}, burn_in = {}, seed = {}", sim.n, sim.burn_in, sim.seed))?;
    io.echo("rng = ChaCha20Rng::seed_from_u64(seed)")?;
    if let ProcessModel::Egarch { params, innovations } = &sim.model {
        for note in check_egarch_conditions(params, innovations).notes {
            io.echo(note)?;
        }
    }
    let path = sim.simulate()?;
    let mut buf = Vec::new();
    write_path_csv(&path, &mut buf)?;
    match &a.out {
        Some(p) => write_atomic(p, &buf)?,
        None => io.out.write_all(&buf)?,
    }
    Ok(())
}

fn model_name(m: ModelArg) -> &'static str {
    match m {
        ModelArg::Iid => "iid",
        ModelArg::Ar1 => "ar1",
        ModelArg::Garch11 => "garch11",
        ModelArg::Egarch => "egarch",
    }
}

fn experiment(a: ExperimentArgs, io: &mut Io<'_>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    let dir = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| GlError::Argument("experiment needs --out or output_dir in the config".into()))?;
    cfg.output_dir = Some(dir.clone());
    io.echo(format!(
        "seed = {}, replications = {}, burn_in = {}",
        cfg.seed, cfg.replications, cfg.process.burn_in
    ))?;
    io.echo("standardization by Monte Carlo mean and sd (n - 1); QQ positions (i - 0.5)/R")?;
    if let ProcessModel::Egarch { params, innovations } = &cfg.process.model {
        for note in check_egarch_conditions(params, innovations).notes {
            io.echo(note)?;
        }
    }
    let report = run_experiment(&cfg)?;
    let manifest = write_report(&report, &dir)?;
    for cell in &report.cells {
        match (&cell.summary, &cell.error) {
            (_, Some(e)) => writeln!(io.out, "{} n={}: error: {e}", cell.estimator, cell.n)?,
            (Some(s), None) => writeln!(
                io.out,
                "{} n={}: mean={} sd={} skewness={} excess_kurtosis={} qq_correlation={}{}",
                cell.estimator,
                cell.n,
                s.mean,
                s.sd,
                s.skewness,
                s.excess_kurtosis,
                s.qq_correlation,
                cell.coverage.map(|c| format!(" coverage={c}")).unwrap_or_default()
            )?,
            (None, None) => {}
        }
    }
    writeln!(io.out, "manifest {} ({} files) in {}", manifest.digest(), manifest.entries.len(), dir.display())?;
    Ok(())
}
