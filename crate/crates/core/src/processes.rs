//! Simulators for iid, AR(1), GARCH(1,1) and EGARCH(p, q) paths.
//!
//! Every path is driven by a ChaCha20 stream. [`substream`] derives the
//! stream for a (master seed, key, replication) triple: the key is mixed
//! into the seed with SplitMix64 and the replication index selects the
//! ChaCha stream, so replications never share keystream blocks.

use std::f64::consts::FRAC_2_PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::fmt_g17;
use crate::ustat::Sample;

pub const DEFAULT_BURN_IN: usize = 500;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `ChaCha20Rng::seed_from_u64(master ^ splitmix64(key))` on stream
/// `replication`.
pub fn substream(master: u64, key: u64, replication: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master ^ splitmix64(key));
    rng.set_stream(replication);
    rng
}

/// Driving noise `Z_t`, always with unit marginal variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationModel {
    IidGaussian,
    /// `Z_t = ρ Z_{t-1} + √(1-ρ²) ε_t`, `Z_1 ~ N(0, 1)`.
    Ar1 { rho: f64 },
}

impl Default for InnovationModel {
    fn default() -> Self {
        InnovationModel::IidGaussian
    }
}

impl InnovationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationModel::IidGaussian => Ok(()),
            InnovationModel::Ar1 { rho } if rho.abs() < 1.0 => Ok(()),
            InnovationModel::Ar1 { rho } => Err(GlError::Stationarity(format!(
                "AR(1) innovations need |rho| < 1, got {rho}"
            ))),
        }
    }

    pub fn marginal_variance(&self) -> f64 {
        1.0
    }

    /// `E|Z_t|`; both models have a standard normal marginal.
    pub fn mean_abs(&self) -> f64 {
        FRAC_2_PI.sqrt()
    }

    fn generate<R: Rng + ?Sized>(&self, n_total: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        let mut z = Vec::with_capacity(n_total);
        match *self {
            InnovationModel::IidGaussian => {
                z.extend((0..n_total).map(|_| rng.sample::<f64, _>(StandardNormal)));
            }
            InnovationModel::Ar1 { rho } => {
                let scale = (1.0 - rho * rho).sqrt();
                let mut prev = 0.0;
                for t in 0..n_total {
                    let e: f64 = rng.sample(StandardNormal);
                    prev = if t == 0 { e } else { rho * prev + scale * e };
                    z.push(prev);
                }
            }
        }
        Ok(z)
    }
}

/// Innovation stream of length `n_total` from `seed`.
pub fn simulate_innovations(model: &InnovationModel, n_total: usize, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    innovations_with_rng(model, n_total, &mut rng)
}

pub fn innovations_with_rng<R: Rng + ?Sized>(model: &InnovationModel, n_total: usize, rng: &mut R) -> Result<Sample> {
    Sample::new(model.generate(n_total, rng)?)
}

fn sqrt_two_over_pi() -> f64 {
    FRAC_2_PI.sqrt()
}

/// `log σ_t² = α₀ + Σ α_i f(Z_{t-i}) + Σ β_j log σ²_{t-j}` with
/// `f(z) = θ z + λ (|z| - E|Z|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgarchParams {
    pub alpha0: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub theta: f64,
    pub lambda: f64,
    #[serde(default = "sqrt_two_over_pi")]
    pub mean_abs_z: f64,
}

impl EgarchParams {
    /// `α₁ = 0.2`, `β₁ = 0.05`, `θ = 0.9`, `λ = 0.1`, `α₀ = 0`.
    pub fn scenario1() -> Self {
        Self {
            alpha0: 0.0,
            alpha: vec![0.2],
            beta: vec![0.05],
            theta: 0.9,
            lambda: 0.1,
            mean_abs_z: sqrt_two_over_pi(),
        }
    }

    /// `α₁ = 0.8`, `β₁ = 0.1`, `θ = 0.9`, `λ = 0.1`, `α₀ = 0`.
    pub fn scenario2() -> Self {
        Self {
            alpha: vec![0.8],
            beta: vec![0.1],
            ..Self::scenario1()
        }
    }

    /// `max(p, q)`.
    pub fn order(&self) -> usize {
        self.alpha.len().max(self.beta.len())
    }

    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn news_impact(&self, z: f64) -> f64 {
        self.theta * z + self.lambda * (z.abs() - self.mean_abs_z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.beta.is_empty() {
            return Err(GlError::Argument("EGARCH needs p >= 1 and q >= 1".into()));
        }
        let all = [self.alpha0, self.theta, self.lambda, self.mean_abs_z];
        if all.iter().chain(&self.alpha).chain(&self.beta).any(|v| !v.is_finite()) {
            return Err(GlError::Argument("EGARCH parameters must be finite".into()));
        }
        let s = self.beta_sum();
        if s.abs() >= 1.0 {
            return Err(GlError::Stationarity(format!("|sum beta| = {} >= 1", s.abs())));
        }
        Ok(())
    }
}

/// Parameters of a GARCH(1,1) recursion
/// `σ_t² = α₀ + α₁ X²_{t-1} + β₁ σ²_{t-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Garch11Params {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl Garch11Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha1 >= 0.0 && self.beta1 >= 0.0) {
            return Err(GlError::Argument(format!(
                "GARCH(1,1) needs alpha0 > 0 and alpha1, beta1 >= 0, got {self:?}"
            )));
        }
        if self.alpha1 + self.beta1 >= 1.0 {
            return Err(GlError::Stationarity(format!(
                "alpha1 + beta1 = {} >= 1",
                self.alpha1 + self.beta1
            )));
        }
        Ok(())
    }

    pub fn stationary_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha1 - self.beta1)
    }
}

/// Data-generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ProcessModel {
    Iid,
    Ar1 {
        rho: f64,
    },
    Garch11 {
        #[serde(flatten)]
        params: Garch11Params,
        #[serde(default)]
        innovations: InnovationModel,
    },
    Egarch {
        #[serde(flatten)]
        params: EgarchParams,
        #[serde(default)]
        innovations: InnovationModel,
    },
    /// Every observation equals `value`.
    Constant {
        value: f64,
    },
}

impl ProcessModel {
    pub fn egarch_scenario1() -> Self {
        ProcessModel::Egarch {
            params: EgarchParams::scenario1(),
            innovations: InnovationModel::Ar1 { rho: 0.8 },
        }
    }

    pub fn egarch_scenario2() -> Self {
        ProcessModel::Egarch {
            params: EgarchParams::scenario2(),
            innovations: InnovationModel::Ar1 { rho: 0.8 },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessModel::Iid => "iid",
            ProcessModel::Ar1 { .. } => "ar1",
            ProcessModel::Garch11 { .. } => "garch11",
            ProcessModel::Egarch { .. } => "egarch",
            ProcessModel::Constant { .. } => "constant",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::Iid => Ok(()),
            ProcessModel::Ar1 { rho } => InnovationModel::Ar1 { rho: *rho }.validate(),
            ProcessModel::Garch11 { params, innovations } => {
                params.validate()?;
                innovations.validate()
            }
            ProcessModel::Egarch { params, innovations } => {
                params.validate()?;
                innovations.validate()
            }
            ProcessModel::Constant { value } if value.is_finite() => Ok(()),
            ProcessModel::Constant { value } => Err(GlError::Argument(format!("constant {value} is not finite"))),
        }
    }

    /// Path of length `n` after discarding `burn_in` leading values of the
    /// volatility recursions. iid, AR(1) and constant paths ignore `burn_in`.
    pub fn simulate_with_rng<R: Rng + ?Sized>(&self, n: usize, burn_in: usize, rng: &mut R) -> Result<Sample> {
        let sim = SimConfig {
            n,
            burn_in,
            seed: 0,
            model: self.clone(),
        };
        match self {
            ProcessModel::Iid => innovations_with_rng(&InnovationModel::IidGaussian, n, rng),
            ProcessModel::Ar1 { rho } => innovations_with_rng(&InnovationModel::Ar1 { rho: *rho }, n, rng),
            ProcessModel::Constant { value } => {
                self.validate()?;
                Sample::new(vec![*value; n])
            }
            ProcessModel::Garch11 { params, innovations } => {
                params.validate()?;
                let z = innovations_with_rng(innovations, n + burn_in, rng)?;
                simulate_garch11(params.alpha0, params.alpha1, params.beta1, &z, &sim)
            }
            ProcessModel::Egarch { params, innovations } => {
                params.validate()?;
                let z = innovations_with_rng(innovations, n + burn_in + params.order(), rng)?;
                simulate_egarch(params, &z, &sim)
            }
        }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

/// One path: length, burn-in, seed and model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    pub model: ProcessModel,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64, model: ProcessModel) -> Self {
        Self {
            n,
            burn_in: DEFAULT_BURN_IN,
            seed,
            model,
        }
    }

    /// Path drawn from `ChaCha20Rng::seed_from_u64(seed)`.
    pub fn simulate(&self) -> Result<Sample> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        self.model.simulate_with_rng(self.n, self.burn_in, &mut rng)
    }
}

/// EGARCH path from a given innovation stream. The first `max(p, q)` log
/// variances sit at `α₀ / (1 - Σβ)`; `burn_in` further steps are discarded.
pub fn simulate_egarch(params: &EgarchParams, innovations: &Sample, sim: &SimConfig) -> Result<Sample> {
    params.validate()?;
    let r = params.order();
    let total = sim.n + sim.burn_in + r;
    let z = innovations.values();
    if z.len() < total {
        return Err(GlError::InsufficientData {
            needed: total,
            got: z.len(),
        });
    }
    let start = params.alpha0 / (1.0 - params.beta_sum());
    let mut log_var = vec![start; total];
    let mut out = Vec::with_capacity(sim.n);
    for t in r..total {
        let mut lv = params.alpha0;
        for (i, a) in params.alpha.iter().enumerate() {
            lv += a * params.news_impact(z[t - 1 - i]);
        }
        for (j, b) in params.beta.iter().enumerate() {
            lv += b * log_var[t - 1 - j];
        }
        log_var[t] = lv;
        if t >= r + sim.burn_in {
            out.push((0.5 * lv).exp() * z[t]);
        }
    }
    Sample::new(out)
}

/// GARCH(1,1) path from a given innovation stream with
/// `σ_1² = α₀ / (1 - α₁ - β₁)`; `burn_in` leading values are discarded.
pub fn simulate_garch11(alpha0: f64, alpha1: f64, beta1: f64, innovations: &Sample, sim: &SimConfig) -> Result<Sample> {
    let params = Garch11Params { alpha0, alpha1, beta1 };
    params.validate()?;
    let total = sim.n + sim.burn_in;
    let z = innovations.values();
    if z.len() < total {
        return Err(GlError::InsufficientData {
            needed: total,
            got: z.len(),
        });
    }
    let mut var = params.stationary_variance();
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(sim.n);
    for (t, &zt) in z[..total].iter().enumerate() {
        if t > 0 {
            var = alpha0 + alpha1 * prev * prev + beta1 * var;
        }
        prev = var.sqrt() * zt;
        if t >= sim.burn_in {
            out.push(prev);
        }
    }
    Sample::new(out)
}

/// Stationarity and boundedness diagnostics for an EGARCH configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EgarchDiagnostics {
    pub beta_sum: f64,
    pub stationary: bool,
    /// `α₀ / (1 - Σβ)` when the recursion is stationary.
    pub stationary_log_variance_mean: Option<f64>,
    /// Whether `sup_t |Z_t| < ∞` holds for the innovation law.
    pub bounded_innovations: bool,
    pub notes: Vec<String>,
}

pub fn check_egarch_conditions(params: &EgarchParams, model: &InnovationModel) -> EgarchDiagnostics {
    let beta_sum = params.beta_sum();
    let stationary = beta_sum.abs() < 1.0;
    let mut notes = Vec::new();
    if stationary {
        notes.push(format!("|sum beta| = {} < 1: log-variance recursion is stable", beta_sum.abs()));
    } else {
        notes.push(format!("|sum beta| = {} >= 1: log-variance recursion is not stationary", beta_sum.abs()));
    }
    // both supported innovation laws have Gaussian marginals
    let bounded_innovations = false;
    notes.push(format!(
        "{} innovations are unbounded, so sup_t |Z_t| < inf fails strictly; \
         the moment surrogate E|Z_t| = {:.6} <= 1 holds",
        match model {
            InnovationModel::IidGaussian => "iid Gaussian",
            InnovationModel::Ar1 { .. } => "Gaussian AR(1)",
        },
        model.mean_abs()
    ));
    EgarchDiagnostics {
        beta_sum,
        stationary,
        stationary_log_variance_mean: stationary.then(|| params.alpha0 / (1.0 - beta_sum)),
        bounded_innovations,
        notes,
    }
}

/// One value per line under the header `x`, 17 significant digits.
pub fn write_path_csv<W: Write>(path: &Sample, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x")?;
    for &v in path.values() {
        writeln!(out, "{}", fmt_g17(v))?;
    }
    out.flush()
}
