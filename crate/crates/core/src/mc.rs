//! Monte Carlo harness: simulate `R` paths per sample size, evaluate every
//! configured estimator on the same paths, standardize by the Monte Carlo
//! mean and standard deviation, and summarize normality.
//!
//! Path `r` at sample size `n` is drawn from `substream(seed, n, r)`, so a
//! cell's values depend only on the master seed, its `n` and its estimator.
//! Random subsets for subsampled Q use the separate key `n | SUBSAMPLE_TAG`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GlError, Result};
use crate::fmt_g17;
use crate::glstat::{standard_normal_quantile, Estimator, GLSpecConfig, QMode};
use crate::lrv::{gl_confidence_interval, LrvConfig};
use crate::processes::{substream, ProcessModel, DEFAULT_BURN_IN};
use crate::ustat::Sample;
use crate::write_atomic;

const SUBSAMPLE_TAG: u64 = 1 << 63;

pub const DEFAULT_REPLICATIONS: usize = 500;

fn default_q_m() -> usize {
    3
}

fn default_q_alpha() -> f64 {
    0.5
}

fn default_c_alpha() -> f64 {
    0.25
}

fn default_c_const() -> f64 {
    1.0
}

/// Estimator entry of an experiment config, tagged by `name`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Gini,
    GiniOs,
    Q {
        #[serde(default = "default_q_m")]
        m: usize,
        #[serde(default = "default_q_alpha")]
        alpha: f64,
        #[serde(default)]
        mode: QMode,
    },
    C {
        #[serde(default = "default_c_alpha")]
        alpha: f64,
        #[serde(default = "default_c_const")]
        c_alpha: f64,
    },
    Lms,
    Gl {
        label: String,
        spec: GLSpecConfig,
    },
}

impl EstimatorConfig {
    pub fn q_default() -> Self {
        EstimatorConfig::Q {
            m: 3,
            alpha: 0.5,
            mode: QMode::default(),
        }
    }

    /// File-name label of the cell.
    pub fn label(&self) -> String {
        match self {
            EstimatorConfig::Gini => "gini".into(),
            EstimatorConfig::GiniOs => "gini_os".into(),
            EstimatorConfig::Q { .. } => "q".into(),
            EstimatorConfig::C { .. } => "c".into(),
            EstimatorConfig::Lms => "lms".into(),
            EstimatorConfig::Gl { label, .. } => label.clone(),
        }
    }

    pub fn build(&self) -> Result<Estimator> {
        Ok(match self {
            EstimatorConfig::Gini => Estimator::Gini,
            EstimatorConfig::GiniOs => Estimator::GiniOs,
            EstimatorConfig::Q { m, alpha, mode } => Estimator::Q {
                m: *m,
                alpha: *alpha,
                mode: *mode,
            },
            EstimatorConfig::C { alpha, c_alpha } => Estimator::C {
                alpha: *alpha,
                c_alpha: *c_alpha,
            },
            EstimatorConfig::Lms => Estimator::Lms,
            EstimatorConfig::Gl { label, spec } => {
                if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    return Err(GlError::Config(format!(
                        "GL estimator label `{label}` must be non-empty and use only [A-Za-z0-9_-]"
                    )));
                }
                Estimator::Gl(spec.build()?)
            }
        })
    }
}

/// Process part of an experiment: the model plus its burn-in. Length and
/// seed come from the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessTemplate {
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub model: ProcessModel,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_level() -> f64 {
    0.95
}

/// Full experiment description; round-trips through TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    /// Nominal level of the per-replication intervals when `lrv` is set.
    #[serde(default = "default_level")]
    pub coverage_level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub process: ProcessTemplate,
    pub estimators: Vec<EstimatorConfig>,
    /// Enables interval coverage when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lrv: Option<LrvConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| GlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GlError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(GlError::Config(format!("replications must be >= 2, got {}", self.replications)));
        }
        if self.sample_sizes.is_empty() {
            return Err(GlError::Config("sample_sizes is empty".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 2) {
            return Err(GlError::Config(format!("sample sizes must be >= 2, got {n}")));
        }
        if self.estimators.is_empty() {
            return Err(GlError::Config("no estimators configured".into()));
        }
        if !(self.coverage_level > 0.0 && self.coverage_level < 1.0) {
            return Err(GlError::Config(format!("coverage_level must lie in (0, 1), got {}", self.coverage_level)));
        }
        let mut seen = BTreeMap::new();
        for e in &self.estimators {
            e.build()?;
            if seen.insert(e.label(), ()).is_some() {
                return Err(GlError::Config(format!("duplicate estimator label `{}`", e.label())));
            }
        }
        self.process.model.validate()
    }
}

/// Moment and QQ summary of a replication set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalitySummary {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub qq_correlation: f64,
}

/// One (estimator, n) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub estimator: String,
    pub n: usize,
    pub conventions: String,
    pub estimates: Vec<f64>,
    pub standardized: Vec<f64>,
    pub summary: Option<NormalitySummary>,
    pub qq: Vec<(f64, f64)>,
    /// Fraction of intervals containing the Monte Carlo mean.
    pub coverage: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: Option<ExperimentConfig>,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, estimator: &str, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.estimator == estimator && c.n == n)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// `(v - mean) / sd` with the `n - 1` standard deviation.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(GlError::InsufficientData { needed: 2, got: values.len() });
    }
    let (mean, sd) = mean_sd(values);
    if !(sd > 0.0) {
        return Err(GlError::DegenerateVariance("replication estimates have zero spread".into()));
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// `(Φ^{-1}((i - 0.5)/R), v_(i))` over the sorted input, which the caller
/// has standardized.
pub fn qq_points(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.len() < 2 {
        return Err(GlError::InsufficientData { needed: 2, got: values.len() });
    }
    let (_, sd) = mean_sd(values);
    if !(sd > 0.0) {
        return Err(GlError::DegenerateVariance("QQ points of a constant vector".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (standard_normal_quantile((i as f64 + 0.5) / r), v))
        .collect())
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Moment skewness, excess kurtosis and QQ correlation.
pub fn normality_summary(values: &[f64]) -> Result<NormalitySummary> {
    if values.len() < 4 {
        return Err(GlError::InsufficientData { needed: 4, got: values.len() });
    }
    let (mean, sd) = mean_sd(values);
    if !(sd > 0.0) {
        return Err(GlError::DegenerateVariance("normality summary of a constant vector".into()));
    }
    let n = values.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let qq = qq_points(values)?;
    Ok(NormalitySummary {
        mean,
        sd,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        qq_correlation: pearson(&qq),
    })
}

struct Replicate {
    estimates: Vec<Result<f64>>,
    intervals: Vec<Option<Result<(f64, f64)>>>,
}

fn run_replication(
    cfg: &ExperimentConfig,
    estimators: &[Estimator],
    n: usize,
    r: usize,
) -> Replicate {
    let k = estimators.len();
    let mut path_rng = substream(cfg.seed, n as u64, r as u64);
    let path = match cfg.process.model.simulate_with_rng(n, cfg.process.burn_in, &mut path_rng) {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return Replicate {
                estimates: (0..k).map(|_| Err(GlError::Domain(msg.clone()))).collect(),
                intervals: (0..k).map(|_| None).collect(),
            };
        }
    };
    let estimates = estimators
        .iter()
        .map(|est| {
            let mut sub_rng = substream(cfg.seed, n as u64 | SUBSAMPLE_TAG, r as u64);
            est.evaluate_with_rng(&path, &mut sub_rng)
        })
        .collect();
    let intervals = estimators
        .iter()
        .map(|est| cfg.lrv.as_ref().map(|lrv| interval(&path, est, lrv, cfg.coverage_level)))
        .collect();
    Replicate { estimates, intervals }
}

fn interval(path: &Sample, est: &Estimator, lrv: &LrvConfig, level: f64) -> Result<(f64, f64)> {
    let spec = est.gl_spec(path.len())?;
    let ci = gl_confidence_interval(path, &spec, lrv, level)?;
    Ok((ci.lo, ci.hi))
}

fn assemble_cell(
    label: String,
    conventions: String,
    n: usize,
    estimates: Vec<Result<f64>>,
    intervals: Vec<Option<Result<(f64, f64)>>>,
) -> CellReport {
    let mut cell = CellReport {
        estimator: label,
        n,
        conventions,
        estimates: Vec::new(),
        standardized: Vec::new(),
        summary: None,
        qq: Vec::new(),
        coverage: None,
        error: None,
    };
    let values: Result<Vec<f64>> = estimates.into_iter().collect();
    let values = match values {
        Ok(v) => v,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    cell.estimates = values;
    let analysed = standardize(&cell.estimates).and_then(|z| {
        let qq = qq_points(&z)?;
        let summary = normality_summary(&cell.estimates)?;
        Ok((z, qq, summary))
    });
    match analysed {
        Ok((z, qq, summary)) => {
            cell.standardized = z;
            cell.qq = qq;
            cell.summary = Some(summary);
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    }
    if intervals.iter().any(Option::is_some) {
        let grand_mean = cell.summary.map(|s| s.mean).unwrap_or(f64::NAN);
        let ivs: Result<Vec<(f64, f64)>> = intervals.into_iter().flatten().collect();
        match ivs {
            Ok(ivs) => {
                let hits = ivs.iter().filter(|(lo, hi)| *lo <= grand_mean && grand_mean <= *hi).count();
                cell.coverage = Some(hits as f64 / ivs.len() as f64);
            }
            Err(e) => cell.error = Some(format!("coverage: {e}")),
        }
    }
    cell
}

/// Runs every (estimator, n) cell. Failures are recorded per cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let estimators: Vec<Estimator> = cfg.estimators.iter().map(EstimatorConfig::build).collect::<Result<_>>()?;
    let k = estimators.len();
    // per_n[i][e] = (estimates, intervals) for sample_sizes[i], estimator e
    let mut per_n = Vec::with_capacity(cfg.sample_sizes.len());
    for &n in &cfg.sample_sizes {
        let reps: Vec<Replicate> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| run_replication(cfg, &estimators, n, r))
            .collect();
        let mut by_est: Vec<(Vec<Result<f64>>, Vec<Option<Result<(f64, f64)>>>)> =
            (0..k).map(|_| (Vec::with_capacity(reps.len()), Vec::with_capacity(reps.len()))).collect();
        for rep in reps {
            for (slot, (e, iv)) in by_est.iter_mut().zip(rep.estimates.into_iter().zip(rep.intervals)) {
                slot.0.push(e);
                slot.1.push(iv);
            }
        }
        per_n.push(by_est);
    }
    let mut cells = Vec::with_capacity(k * cfg.sample_sizes.len());
    for (e, est) in estimators.iter().enumerate() {
        let label = cfg.estimators[e].label();
        for (by_est, &n) in per_n.iter_mut().zip(&cfg.sample_sizes) {
            let (estimates, intervals) = std::mem::take(&mut by_est[e]);
            cells.push(assemble_cell(label.clone(), est.conventions(), n, estimates, intervals));
        }
    }
    Ok(ExperimentReport {
        config: Some(cfg.clone()),
        cells,
    })
}

/// Files written by [`write_report`] with their SHA-256 digests, sorted by
/// file name. Also written as `manifest.txt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        self.entries.iter().map(|(name, hash)| format!("{hash}  {name}\n")).collect()
    }

    /// SHA-256 over the rendered manifest.
    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.render().as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| GlError::Io(e.into_error()))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

/// Writes per-cell CSVs, `summary.csv`, `config.toml` (when the report
/// carries a config) and `manifest.txt` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let (burn_in, replications) = report
        .config
        .as_ref()
        .map(|c| (c.process.burn_in.to_string(), c.replications.to_string()))
        .unwrap_or_default();
    for cell in &report.cells {
        if cell.error.is_none() || !cell.estimates.is_empty() {
            files.insert(
                format!("estimates_{}_{}.csv", cell.estimator, cell.n),
                csv_bytes(
                    &["replication", "estimate"],
                    cell.estimates.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), fmt_g17(*v)]),
                )?,
            );
        }
        if !cell.qq.is_empty() {
            files.insert(
                format!("qq_{}_{}.csv", cell.estimator, cell.n),
                csv_bytes(
                    &["theoretical", "empirical"],
                    cell.qq.iter().map(|(t, e)| vec![fmt_g17(*t), fmt_g17(*e)]),
                )?,
            );
        }
    }
    let summary = csv_bytes(
        &[
            "estimator",
            "n",
            "replications",
            "burn_in",
            "mean",
            "sd",
            "skewness",
            "excess_kurtosis",
            "qq_correlation",
            "coverage",
            "conventions",
            "error",
        ],
        report.cells.iter().map(|c| {
            let s = c.summary;
            vec![
                c.estimator.clone(),
                c.n.to_string(),
                replications.clone(),
                burn_in.clone(),
                opt(s.map(|s| s.mean)),
                opt(s.map(|s| s.sd)),
                opt(s.map(|s| s.skewness)),
                opt(s.map(|s| s.excess_kurtosis)),
                opt(s.map(|s| s.qq_correlation)),
                opt(c.coverage),
                c.conventions.clone(),
                c.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    files.insert("summary.csv".into(), summary);
    if let Some(cfg) = &report.config {
        let mut echo = cfg.clone();
        echo.output_dir = None;
        files.insert("config.toml".into(), echo.to_toml()?.into_bytes());
    }
    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        write_atomic(&dir.join(name), bytes)?;
        entries.push((name.clone(), hex(&Sha256::digest(bytes))));
    }
    let manifest = Manifest { entries };
    write_atomic(&dir.join("manifest.txt"), manifest.render().as_bytes())?;
    Ok(manifest)
}
