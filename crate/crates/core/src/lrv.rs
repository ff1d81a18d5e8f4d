//! Long-run variance estimation for U-statistics and GL-statistics.
//!
//! Both estimators share one shape: evaluate an empirical first projection
//! (`ĝ_1` for a kernel, `Â_1` for the GL influence kernel) at every sample
//! point, then form `Σ_{|r| < n} κ(|r|/b_n) ρ̂(r)` with
//! `ρ̂(r) = (1/n) Σ_{i=1}^{n-r} v_i v_{i+r}`. The autocovariance sum runs
//! lag-major in ascending index order, so results do not depend on how the
//! projections were parallelized.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::glstat::{gl_statistic_from_values, standard_normal_quantile, DiscreteTerm, GLSpec, WeightFunctionJ};
use crate::kernels::KernelSpec;
use crate::ustat::{
    binom, check_capacity, kernel_values, G1Estimator, KernelValueSet, Normalization, Projection,
    Sample, DEFAULT_ENUMERATION_CAP,
};

/// Lag weight `κ`.
#[derive(Clone)]
pub enum WeightFunction {
    /// `(1 - t) 1[t <= 1]`.
    Bartlett,
    /// Parzen window, compact support on `[0, 1]`.
    Parzen,
    /// `1[t <= 1]`; not positive semidefinite, estimates can be negative.
    Truncated,
    Custom {
        name: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for WeightFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (WeightFunction::Custom { eval: a, .. }, WeightFunction::Custom { eval: b, .. }) => {
                Arc::ptr_eq(a, b)
            }
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

impl WeightFunction {
    pub fn name(&self) -> &str {
        match self {
            WeightFunction::Bartlett => "bartlett",
            WeightFunction::Parzen => "parzen",
            WeightFunction::Truncated => "truncated",
            WeightFunction::Custom { name, .. } => name,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "bartlett" => Ok(WeightFunction::Bartlett),
            "parzen" => Ok(WeightFunction::Parzen),
            "truncated" => Ok(WeightFunction::Truncated),
            other => Err(GlError::Config(format!(
                "unknown lag weight `{other}` (expected bartlett, parzen or truncated)"
            ))),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            WeightFunction::Bartlett => weight_bartlett_unchecked(t),
            WeightFunction::Parzen => {
                if t <= 0.5 {
                    1.0 - 6.0 * t * t + 6.0 * t * t * t
                } else if t <= 1.0 {
                    2.0 * (1.0 - t).powi(3)
                } else {
                    0.0
                }
            }
            WeightFunction::Truncated => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFunction::Custom { eval, .. } => eval(t),
        }
    }

    /// Whether `κ(t) = 0` for every `t > 1`.
    fn compact(&self) -> bool {
        !matches!(self, WeightFunction::Custom { .. })
    }
}

impl Serialize for WeightFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for WeightFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        WeightFunction::from_name(&name).map_err(serde::de::Error::custom)
    }
}

fn weight_bartlett_unchecked(t: f64) -> f64 {
    if t <= 1.0 {
        1.0 - t
    } else {
        0.0
    }
}

/// Bartlett weight `κ(t) = (1 - t) 1[t <= 1]` for `t >= 0`.
pub fn weight_bartlett(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(GlError::Argument(format!("lag weight argument must be >= 0, got {t}")));
    }
    Ok(weight_bartlett_unchecked(t))
}

/// `floor(n^{1/3})`, at least 1. Integer cube root, so 1000 gives 10.
pub fn default_bandwidth(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(GlError::InsufficientData { needed: 2, got: n });
    }
    let mut k = (n as f64).cbrt().round() as usize;
    while k * k * k > n {
        k -= 1;
    }
    while (k + 1) * (k + 1) * (k + 1) <= n {
        k += 1;
    }
    Ok(k.max(1) as f64)
}

/// How `b_n` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// [`default_bandwidth`].
    #[default]
    Auto,
    Fixed { b: f64 },
    /// `c n^e`; consistent when `0 < e < 1/2`.
    PowerLaw { c: f64, e: f64 },
}

impl BandwidthPolicy {
    pub fn bandwidth(&self, n: usize) -> Result<f64> {
        let b = match *self {
            BandwidthPolicy::Auto => return default_bandwidth(n),
            BandwidthPolicy::Fixed { b } => b,
            BandwidthPolicy::PowerLaw { c, e } => c * (n as f64).powf(e),
        };
        if !(b > 0.0 && b.is_finite()) {
            return Err(GlError::Argument(format!("bandwidth must be positive, got {b}")));
        }
        Ok(b)
    }
}

fn default_halfwidth() -> f64 {
    0.5
}

/// Lag weight, bandwidth, density half-width constant and `ĝ_1`
/// normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrvConfig {
    #[serde(default = "default_weight")]
    pub weight: WeightFunction,
    #[serde(default)]
    pub bandwidth: BandwidthPolicy,
    /// `c` in `δ_n = c · IQR_h · n^{-1/5}`.
    #[serde(default = "default_halfwidth")]
    pub density_halfwidth: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_weight() -> WeightFunction {
    WeightFunction::Bartlett
}

impl Default for LrvConfig {
    fn default() -> Self {
        Self {
            weight: WeightFunction::Bartlett,
            bandwidth: BandwidthPolicy::Auto,
            density_halfwidth: default_halfwidth(),
            normalization: Normalization::Combinatorial,
        }
    }
}

/// `Σ_{|r| < n} κ(|r|/b) ρ̂(r)` with the `1/n` denominator at every lag.
pub fn weighted_autocovariance_sum(values: &[f64], weight: &WeightFunction, b: f64) -> f64 {
    let n = values.len();
    let inv_n = 1.0 / n as f64;
    let rho = |r: usize| -> f64 {
        values[..n - r]
            .iter()
            .zip(&values[r..])
            .map(|(a, c)| a * c)
            .sum::<f64>()
            * inv_n
    };
    let mut total = weight.eval(0.0) * rho(0);
    for r in 1..n {
        let t = r as f64 / b;
        if weight.compact() && t > 1.0 {
            break;
        }
        let w = weight.eval(t);
        if w != 0.0 {
            total += 2.0 * w * rho(r);
        }
    }
    total
}

/// Long-run variance `σ̂²` of the first projection of a U-statistic. The raw
/// value is returned; non-PSD weights may make it negative.
pub fn lrv_ustat(sample: &Sample, kernel: &KernelSpec, cfg: &LrvConfig) -> Result<f64> {
    let g1 = G1Estimator::new(sample, kernel, cfg.normalization)?.at_sample();
    let b = cfg.bandwidth.bandwidth(sample.len())?;
    Ok(weighted_autocovariance_sum(&g1, &cfg.weight, b))
}

/// Finite-difference density of `H_n` at `ξ`:
/// `(H_n(ξ + δ) - H_n(ξ - δ)) / (2δ)` with `δ = c · IQR_h · n^{-1/5}`.
fn density_from_values(values: &KernelValueSet, xi: f64, p: f64, n: usize, c: f64) -> Result<f64> {
    let iqr = values.quantile(0.75) - values.quantile(0.25);
    let delta = c * iqr * (n as f64).powf(-0.2);
    let lo = xi - delta;
    let hi = xi + delta;
    if !(delta > 0.0) {
        return Err(GlError::DegenerateDensity { p, lo, hi });
    }
    let mass = values.cdf(hi) - values.cdf(lo);
    let density = mass / (2.0 * delta);
    if !(density > 0.0 && density.is_finite()) {
        return Err(GlError::DegenerateDensity { p, lo, hi });
    }
    Ok(density)
}

/// `ĥ_F(ξ̂_p)` with `ξ̂_p = H_n^{-1}(p)` (ceil convention).
pub fn density_at_uquantile(sample: &Sample, kernel: &KernelSpec, p: f64, cfg: &LrvConfig) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GlError::Argument(format!("density level must lie in (0, 1), got {p}")));
    }
    let values = kernel_values(sample, kernel)?;
    density_from_values(&values, values.quantile(p), p, sample.len(), cfg.density_halfwidth)
}

/// Empirical surrogates plugged into the influence kernel `A`: `H_n` for
/// `H_F`, `J∘H_n` for `J∘H_F`, U-quantiles for `H_F^{-1}(p_i)` and
/// finite-difference densities for `h_F(H_F^{-1}(p_i))`.
///
/// The integral term of `A` is evaluated exactly against the step function
/// `H_n`: with sorted values `v_0 <= ... <= v_{N-1}`, `H_n = (k+1)/N` on
/// `[v_k, v_{k+1})`, so `∫ J(H_n)` up to any point is a running sum.
#[derive(Clone, Debug)]
pub struct PluginContext {
    values: KernelValueSet,
    statistic: f64,
    j: WeightFunctionJ,
    /// `J((k+1)/N)` on `[v_k, v_{k+1})`.
    levels: Vec<f64>,
    /// `∫_{v_0}^{v_k} J(H_n)`.
    cum: Vec<f64>,
    /// `∫_{v_0}^{v_{N-1}} H_n J(H_n)`.
    c0: f64,
    j_below: f64,
    j_above: f64,
    discrete: Vec<DiscreteTerm>,
    quantiles: Vec<f64>,
    densities: Vec<f64>,
    normalization: Normalization,
}

impl PluginContext {
    pub fn new(sample: &Sample, spec: &GLSpec, cfg: &LrvConfig) -> Result<Self> {
        let values = kernel_values(sample, spec.kernel())?;
        Self::from_values(values, sample.len(), spec, cfg)
    }

    pub fn from_values(values: KernelValueSet, n: usize, spec: &GLSpec, cfg: &LrvConfig) -> Result<Self> {
        let v = values.values();
        let count = v.len();
        let inv = 1.0 / count as f64;
        let j = spec.j().clone();
        let mut levels = Vec::with_capacity(count.saturating_sub(1));
        let mut cum = Vec::with_capacity(count);
        let mut c0 = 0.0;
        let mut acc = 0.0;
        cum.push(0.0);
        if !j.is_zero() {
            for k in 0..count - 1 {
                let h = (k + 1) as f64 * inv;
                let level = j.eval(h);
                let width = v[k + 1] - v[k];
                acc += level * width;
                c0 += h * level * width;
                levels.push(level);
                cum.push(acc);
            }
        }
        let mut quantiles = Vec::with_capacity(spec.discrete().len());
        let mut densities = Vec::with_capacity(spec.discrete().len());
        for d in spec.discrete() {
            let xi = values.quantile_with(d.p, spec.convention());
            densities.push(density_from_values(&values, xi, d.p, n, cfg.density_halfwidth)?);
            quantiles.push(xi);
        }
        let statistic = gl_statistic_from_values(&values, spec);
        Ok(Self {
            statistic,
            j_below: j.eval(0.0),
            j_above: j.eval(1.0),
            j,
            levels,
            cum,
            c0,
            values,
            discrete: spec.discrete().to_vec(),
            quantiles,
            densities,
            normalization: cfg.normalization,
        })
    }

    pub fn values(&self) -> &KernelValueSet {
        &self.values
    }

    /// `T(H_n)` from the same kernel values.
    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// `-∫ (1[h <= y] - H_n(y)) J(H_n(y)) dy`.
    fn integral_term(&self, h: f64) -> f64 {
        if self.j.is_zero() {
            return 0.0;
        }
        let v = self.values.values();
        let first = v[0];
        let last = v[v.len() - 1];
        let total = self.cum[self.cum.len() - 1];
        if h < first {
            self.c0 - total - (first - h) * self.j_below
        } else if h >= last {
            self.c0 + (h - last) * self.j_above
        } else {
            // h lies in [v_k, v_{k+1}) with v_{k+1} > h
            let k = self.values.count_le(h) - 1;
            self.c0 - total + self.cum[k] + self.levels[k] * (h - v[k])
        }
    }

    /// Plug-in influence kernel as a function of the kernel value `h`.
    pub fn a_of_h(&self, h: f64) -> f64 {
        let mut a = self.integral_term(h);
        for ((d, &xi), &dens) in self.discrete.iter().zip(&self.quantiles).zip(&self.densities) {
            let below = if h <= xi { 1.0 } else { 0.0 };
            a += d.a * (d.p - below) / dens;
        }
        a
    }

    /// `Σ_k |a_k| / ĥ_k`, the discrete part of the bound on `|A|`.
    pub fn discrete_bound(&self) -> f64 {
        self.discrete
            .iter()
            .zip(&self.densities)
            .map(|(d, dens)| d.a.abs() / dens)
            .sum()
    }
}

/// Plug-in `A(args)`.
pub fn a_kernel_hat(spec: &GLSpec, args: &[f64], plugin: &PluginContext) -> Result<f64> {
    let h = spec.kernel().eval(args)?;
    Ok(plugin.a_of_h(h))
}

/// Repeated evaluation of `Â_1`, sharing the centering term.
pub struct A1Estimator<'a> {
    sample: &'a Sample,
    spec: &'a GLSpec,
    plugin: &'a PluginContext,
    first_denom: f64,
    center: f64,
}

impl<'a> A1Estimator<'a> {
    pub fn new(sample: &'a Sample, spec: &'a GLSpec, plugin: &'a PluginContext) -> Result<Self> {
        let m = spec.kernel().m();
        let n = sample.len();
        sample.require(m)?;
        check_capacity(
            "influence projection enumeration",
            binom(n, m - 1).saturating_mul(n as u128),
            DEFAULT_ENUMERATION_CAP,
        )?;
        // the m-subset kernel values are already materialized in the plugin
        let centering_sum: f64 = plugin.values().values().iter().map(|&h| plugin.a_of_h(h)).sum();
        let (first_denom, center_denom) = crate::ustat::denominators(n, m, plugin.normalization());
        Ok(Self {
            sample,
            spec,
            plugin,
            first_denom,
            center: centering_sum / center_denom,
        })
    }

    fn first_sum(&self, x: f64) -> f64 {
        let kernel = self.spec.kernel();
        let plugin = self.plugin;
        Projection {
            x: self.sample.values(),
            m: kernel.m(),
            phi: |args: &[f64]| plugin.a_of_h(kernel.eval_unchecked(args)),
        }
        .first_sum(x)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.first_sum(x) / self.first_denom - self.center
    }

    pub fn at_sample(&self) -> Vec<f64> {
        self.sample.values().par_iter().map(|&x| self.eval(x)).collect()
    }
}

/// `Â_1(x)`.
pub fn a1_hat(sample: &Sample, spec: &GLSpec, x: f64, plugin: &PluginContext) -> Result<f64> {
    if !x.is_finite() {
        return Err(GlError::Domain(format!("evaluation point {x} is not finite")));
    }
    Ok(A1Estimator::new(sample, spec, plugin)?.eval(x))
}

/// Result of [`lrv_gl`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GLVarianceReport {
    /// `max(σ̂²_GL, 0)`.
    pub sigma2_gl: f64,
    pub sigma2_raw: f64,
    /// `m² · sigma2_gl`, the variance of `√n (T(H_n) - T(H_F))`.
    pub sigma2_scaled: f64,
    pub bandwidth_used: f64,
    /// `(p_i, ĥ_F(ξ̂_{p_i}))`.
    pub density_estimates: Vec<(f64, f64)>,
    pub clamped: bool,
    pub statistic: f64,
    pub m: usize,
    pub n: usize,
}

/// `σ̂²_GL` from `Â_1` at every sample point.
pub fn lrv_gl(sample: &Sample, spec: &GLSpec, cfg: &LrvConfig) -> Result<GLVarianceReport> {
    let plugin = PluginContext::new(sample, spec, cfg)?;
    lrv_gl_with_plugin(sample, spec, cfg, &plugin)
}

pub fn lrv_gl_with_plugin(
    sample: &Sample,
    spec: &GLSpec,
    cfg: &LrvConfig,
    plugin: &PluginContext,
) -> Result<GLVarianceReport> {
    let a1 = A1Estimator::new(sample, spec, plugin)?.at_sample();
    let b = cfg.bandwidth.bandwidth(sample.len())?;
    let raw = weighted_autocovariance_sum(&a1, &cfg.weight, b);
    let clamped = raw < 0.0;
    let sigma2 = raw.max(0.0);
    let m = spec.kernel().m();
    Ok(GLVarianceReport {
        sigma2_gl: sigma2,
        sigma2_raw: raw,
        sigma2_scaled: (m * m) as f64 * sigma2,
        bandwidth_used: b,
        density_estimates: spec
            .discrete()
            .iter()
            .map(|d| d.p)
            .zip(plugin.densities().iter().copied())
            .collect(),
        clamped,
        statistic: plugin.statistic(),
        m,
        n: sample.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub level: f64,
    pub z: f64,
    pub half_width: f64,
    pub variance: GLVarianceReport,
}

/// `T(H_n) ± z_{(1+level)/2} · m σ̂_GL / √n`.
pub fn gl_confidence_interval(
    sample: &Sample,
    spec: &GLSpec,
    cfg: &LrvConfig,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(GlError::Argument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let variance = lrv_gl(sample, spec, cfg)?;
    Ok(interval_from_report(variance, level))
}

pub fn interval_from_report(variance: GLVarianceReport, level: f64) -> ConfidenceInterval {
    let z = standard_normal_quantile(0.5 * (1.0 + level));
    let half_width = z * variance.m as f64 * variance.sigma2_gl.sqrt() / (variance.n as f64).sqrt();
    let estimate = variance.statistic;
    ConfidenceInterval {
        lo: estimate - half_width,
        hi: estimate + half_width,
        estimate,
        level,
        z,
        half_width,
        variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glstat::GLSpec;
    use crate::ustat::{hoeffding_g1_hat, QuantileConvention};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    fn normal_sample(rng: &mut ChaCha20Rng, n: usize) -> Sample {
        s(&(0..n).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>())
    }

    #[test]
    fn bartlett_examples() {
        assert_eq!(weight_bartlett(0.0).unwrap(), 1.0);
        assert_eq!(weight_bartlett(0.5).unwrap(), 0.5);
        assert_eq!(weight_bartlett(2.0).unwrap(), 0.0);
        assert!(weight_bartlett(-0.1).is_err());
        assert!(weight_bartlett(f64::NAN).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(default_bandwidth(1000).unwrap(), 10.0);
        assert_eq!(default_bandwidth(8).unwrap(), 2.0);
        assert_eq!(default_bandwidth(27).unwrap(), 3.0);
        assert_eq!(default_bandwidth(2).unwrap(), 1.0);
        assert_eq!(default_bandwidth(2000).unwrap(), 12.0);
        assert!(default_bandwidth(1).is_err());
        assert!(BandwidthPolicy::Fixed { b: 0.0 }.bandwidth(10).is_err());
        let b = BandwidthPolicy::PowerLaw { c: 1.0, e: 0.25 }.bandwidth(10_000).unwrap();
        assert!((b - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lrv_ustat_examples() {
        let cfg = LrvConfig::default();
        for k in [KernelSpec::gini(), KernelSpec::identity(), KernelSpec::min_pairwise(3).unwrap()] {
            assert_eq!(lrv_ustat(&s(&[2.0; 9]), &k, &cfg).unwrap(), 0.0);
        }
        let cfg = LrvConfig {
            bandwidth: BandwidthPolicy::Fixed { b: 1.0 },
            ..LrvConfig::default()
        };
        let v = lrv_ustat(&s(&[0.0, 1.0]), &KernelSpec::gini(), &cfg).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn autocovariance_matches_direct_double_sum() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        for (w, b) in [
            (WeightFunction::Bartlett, 4.0),
            (WeightFunction::Parzen, 7.5),
            (WeightFunction::Truncated, 3.0),
        ] {
            let n = v.len() as i64;
            let mut direct = 0.0;
            for r in -(n - 1)..n {
                let lag = r.unsigned_abs() as usize;
                let rho: f64 = (0..v.len() - lag).map(|i| v[i] * v[i + lag]).sum::<f64>() / v.len() as f64;
                direct += w.eval(lag as f64 / b) * rho;
            }
            let fast = weighted_autocovariance_sum(&v, &w, b);
            assert!((fast - direct).abs() < 1e-12, "{}", w.name());
        }
        let custom = WeightFunction::Custom {
            name: "exp".into(),
            eval: Arc::new(|t| (-t).exp()),
        };
        let full: f64 = {
            let mut total = 0.0;
            for r in 0..v.len() {
                let rho: f64 = (0..v.len() - r).map(|i| v[i] * v[i + r]).sum::<f64>() / v.len() as f64;
                total += if r == 0 { 1.0 } else { 2.0 } * (-(r as f64) / 2.0).exp() * rho;
            }
            total
        };
        assert!((weighted_autocovariance_sum(&v, &custom, 2.0) - full).abs() < 1e-12);
    }

    #[test]
    fn bartlett_lrv_is_nonnegative() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let cfg = LrvConfig::default();
        for i in 0..500 {
            let n = rng.random_range(2..60);
            let x = normal_sample(&mut rng, n);
            let k = if i % 2 == 0 { KernelSpec::gini() } else { KernelSpec::identity() };
            assert!(lrv_ustat(&x, &k, &cfg).unwrap() >= 0.0);
        }
    }

    #[test]
    fn gini_lrv_scales_quadratically() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let cfg = LrvConfig::default();
        for _ in 0..20 {
            let x = normal_sample(&mut rng, 50);
            let a = rng.random_range(0.1..10.0);
            let scaled = s(&x.values().iter().map(|v| a * v).collect::<Vec<_>>());
            let base = lrv_ustat(&x, &KernelSpec::gini(), &cfg).unwrap();
            let big = lrv_ustat(&scaled, &KernelSpec::gini(), &cfg).unwrap();
            assert!((big - a * a * base).abs() <= 1e-10 * big.abs());
        }
    }

    #[test]
    fn density_examples() {
        let grid = s(&(0..1000).map(|i| i as f64 / 999.0).collect::<Vec<_>>());
        let cfg = LrvConfig::default();
        let d = density_at_uquantile(&grid, &KernelSpec::identity(), 0.5, &cfg).unwrap();
        assert!((d - 1.0).abs() < 0.15, "{d}");
        let err = density_at_uquantile(&s(&[3.0; 10]), &KernelSpec::gini(), 0.5, &cfg).unwrap_err();
        assert!(matches!(err, GlError::DegenerateDensity { .. }));
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = normal_sample(&mut rng, 15);
            let p = rng.random_range(0.05..0.95);
            assert!(density_at_uquantile(&x, &KernelSpec::gini(), p, &cfg).unwrap() >= 0.0);
        }
    }

    #[test]
    fn a_kernel_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let x = normal_sample(&mut rng, 10);
        let cfg = LrvConfig::default();
        let zero = GLSpec::new(KernelSpec::gini(), WeightFunctionJ::zero(), vec![], QuantileConvention::Ceil).unwrap();
        let plugin = PluginContext::new(&x, &zero, &cfg).unwrap();
        assert_eq!(a_kernel_hat(&zero, &[0.3, -1.0], &plugin).unwrap(), 0.0);
        assert_eq!(a1_hat(&x, &zero, 0.7, &plugin).unwrap(), 0.0);

        let median = GLSpec::new(
            KernelSpec::gini(),
            WeightFunctionJ::zero(),
            vec![DiscreteTerm { a: 1.0, p: 0.5 }],
            QuantileConvention::Ceil,
        )
        .unwrap();
        let plugin = PluginContext::new(&x, &median, &cfg).unwrap();
        let xi = plugin.quantiles()[0];
        let dens = plugin.densities()[0];
        assert_eq!(plugin.a_of_h(xi), -0.5 / dens);
        assert_eq!(plugin.a_of_h(xi - 0.01), -0.5 / dens);
        assert_eq!(plugin.a_of_h(xi + 1e-9), 0.5 / dens);
        assert!(a_kernel_hat(&median, &[1.0], &plugin).is_err());
    }

    #[test]
    fn a_kernel_is_bounded() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let j = WeightFunctionJ::piecewise(vec![crate::glstat::JPiece {
            lo: 0.1,
            hi: 0.9,
            coeffs: vec![2.0, -1.0],
        }])
        .unwrap();
        let spec = GLSpec::new(
            KernelSpec::min_pairwise(3).unwrap(),
            j.clone(),
            vec![DiscreteTerm { a: 0.7, p: 0.3 }, DiscreteTerm { a: -1.2, p: 0.8 }],
            QuantileConvention::Ceil,
        )
        .unwrap();
        let x = normal_sample(&mut rng, 14);
        let plugin = PluginContext::new(&x, &spec, &LrvConfig::default()).unwrap();
        let range = plugin.values().max() - plugin.values().min();
        let bound = j.sup_norm_bound() * range + plugin.discrete_bound();
        for _ in 0..2000 {
            let i = rng.random_range(0..14);
            let jdx = rng.random_range(0..14);
            let k = rng.random_range(0..14);
            if i == jdx || jdx == k || i == k {
                continue;
            }
            let args = [x.values()[i], x.values()[jdx], x.values()[k]];
            assert!(a_kernel_hat(&spec, &args, &plugin).unwrap().abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn integral_term_matches_quadrature() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x = normal_sample(&mut rng, 9);
        let j = WeightFunctionJ::piecewise(vec![crate::glstat::JPiece {
            lo: 0.0,
            hi: 1.0,
            coeffs: vec![0.3, 1.0, -0.5],
        }])
        .unwrap();
        let spec = GLSpec::new(KernelSpec::gini(), j.clone(), vec![], QuantileConvention::Ceil).unwrap();
        let plugin = PluginContext::new(&x, &spec, &LrvConfig::default()).unwrap();
        let vals = plugin.values().clone();
        let lo = vals.min() - 1.0;
        let hi = vals.max() + 1.0;
        for h in [lo + 0.5, vals.min(), vals.kth(10), 0.5 * (vals.kth(3) + vals.kth(4)), vals.max(), hi - 0.3] {
            // midpoint rule on a fine grid; exact up to the cells containing jumps
            let steps = 400_000;
            let dy = (hi - lo) / steps as f64;
            let mut quad = 0.0;
            for i in 0..steps {
                let y = lo + (i as f64 + 0.5) * dy;
                let hn = vals.cdf(y);
                let ind = if h <= y { 1.0 } else { 0.0 };
                quad -= (ind - hn) * j.eval(hn) * dy;
            }
            assert!((plugin.a_of_h(h) - quad).abs() < 1e-3, "h={h}");
        }
    }

    #[test]
    fn gini_influence_reduces_to_g1() {
        // with J = 1 and d = 0 the plug-in A is h - U_n exactly
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let cfg = LrvConfig::default();
        for n in [2usize, 5, 30] {
            let x = normal_sample(&mut rng, n);
            let spec = GLSpec::gini();
            let plugin = PluginContext::new(&x, &spec, &cfg).unwrap();
            let u = crate::ustat::u_statistic(&x, spec.kernel()).unwrap();
            for h in [0.0, 0.4, 1.7, 10.0] {
                assert!((plugin.a_of_h(h) - (h - u)).abs() < 1e-12);
            }
            for norm in [Normalization::Combinatorial, Normalization::PaperLiteral] {
                let cfg = LrvConfig { normalization: norm, ..LrvConfig::default() };
                let plugin = PluginContext::new(&x, &spec, &cfg).unwrap();
                for &p in x.values() {
                    let a1 = a1_hat(&x, &spec, p, &plugin).unwrap();
                    let g1 = hoeffding_g1_hat(&x, spec.kernel(), p, norm).unwrap();
                    if norm == Normalization::Combinatorial {
                        assert!((a1 - g1).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn lrv_gl_examples() {
        let cfg = LrvConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let x = normal_sample(&mut rng, 20);
        let zero = GLSpec::new(KernelSpec::gini(), WeightFunctionJ::zero(), vec![], QuantileConvention::Ceil).unwrap();
        assert_eq!(lrv_gl(&x, &zero, &cfg).unwrap().sigma2_gl, 0.0);
        let r = lrv_gl(&s(&[1.5; 12]), &GLSpec::gini(), &cfg).unwrap();
        assert_eq!(r.sigma2_gl, 0.0);
        assert!(!r.clamped);
        let r = lrv_gl(&x, &GLSpec::q(3, 0.5).unwrap(), &cfg).unwrap();
        assert_eq!(r.density_estimates.len(), 1);
        assert_eq!(r.sigma2_scaled, 9.0 * r.sigma2_gl);
    }

    #[test]
    fn clamping_flag() {
        // alternating signs make the truncated-window estimate negative
        let x = s(&(0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>());
        let cfg = LrvConfig {
            weight: WeightFunction::Truncated,
            bandwidth: BandwidthPolicy::Fixed { b: 1.0 },
            ..LrvConfig::default()
        };
        let spec = GLSpec::new(KernelSpec::identity(), WeightFunctionJ::constant(1.0), vec![], QuantileConvention::Ceil).unwrap();
        let r = lrv_gl(&x, &spec, &cfg).unwrap();
        assert!(r.sigma2_raw < 0.0);
        assert!(r.clamped);
        assert_eq!(r.sigma2_gl, 0.0);
    }

    #[test]
    fn confidence_interval_examples() {
        let cfg = LrvConfig::default();
        let ci = gl_confidence_interval(&s(&[2.0; 8]), &GLSpec::gini(), &cfg, 0.95).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
        assert!((ci.z - 1.95996).abs() < 1e-4);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let x = normal_sample(&mut rng, 40);
        let ci = gl_confidence_interval(&x, &GLSpec::gini(), &cfg, 0.9).unwrap();
        assert!(ci.lo <= ci.estimate && ci.estimate <= ci.hi);
        assert!(gl_confidence_interval(&x, &GLSpec::gini(), &cfg, 1.0).is_err());
    }

    #[test]
    fn config_serde() {
        let text = "weight = \"parzen\"\ndensity_halfwidth = 0.75\nnormalization = \"paper_literal\"\n[bandwidth]\npolicy = \"fixed\"\nb = 4.0\n";
        let cfg: LrvConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.weight, WeightFunction::Parzen);
        assert_eq!(cfg.bandwidth, BandwidthPolicy::Fixed { b: 4.0 });
        let back: LrvConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(toml::from_str::<LrvConfig>("weight = \"qs\"").is_err());
        let empty: LrvConfig = toml::from_str("").unwrap();
        assert_eq!(empty, LrvConfig::default());
    }
}
