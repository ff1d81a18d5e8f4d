//! U-statistics, the empirical U-distribution `H_n`, U-quantiles and the
//! empirical first Hoeffding projection.
//!
//! Kernel evaluations are always taken over strictly increasing index tuples
//! `i_1 < ... < i_m`, so a sample of length `n` yields `C(n, m)` values. Full
//! enumeration is guarded by a cap ([`DEFAULT_ENUMERATION_CAP`]); exceeding it
//! is an error, never a silent subsample.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{GlError, Result};
use crate::kernels::{KernelKind, KernelSpec};

/// Largest number of kernel evaluations a single enumeration may perform.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// An ordered, finite, real-valued time series `X_1..X_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample(Vec<f64>);

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GlError::Domain(format!(
                "sample value {v} at position {} is not finite",
                i + 1
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.0.clone();
        v.sort_unstable_by(f64::total_cmp);
        v
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.0.len() < needed {
            return Err(GlError::InsufficientData {
                needed,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = GlError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Sample::new(values)
    }
}

/// How the sums of the empirical first projection are normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the number of summands, `C(n, m-1)` and `C(n, m)`.
    #[default]
    Combinatorial,
    /// Divide by `n^(m-1)` and `n^m`.
    PaperLiteral,
}

/// Which order statistic a probability level selects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileConvention {
    /// `k = ceil(p N)`, the left-continuous generalized inverse.
    #[default]
    Ceil,
    /// `k = max(1, floor(p N))`, the bracket index used by the Q estimator.
    FloorBracket,
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// 1-based rank selected by level `p` among `len` ordered values.
pub fn rank_for(p: f64, len: usize, convention: QuantileConvention) -> usize {
    let raw = p * len as f64;
    // p N is often meant to be an integer (p = 1/2, N even); snap values that
    // are within rounding distance so 2/3 * 3 selects rank 2, not 3
    let snapped = if (raw - raw.round()).abs() <= 1e-9 * raw.abs().max(1.0) {
        raw.round()
    } else {
        raw
    };
    let k = match convention {
        QuantileConvention::Ceil => snapped.ceil(),
        QuantileConvention::FloorBracket => snapped.floor(),
    };
    (k.max(1.0) as usize).min(len.max(1))
}

pub(crate) fn check_capacity(what: &str, count: u128, cap: u128) -> Result<()> {
    if count > cap {
        return Err(GlError::Capacity {
            what: what.to_string(),
            count,
            cap,
        });
    }
    Ok(())
}

/// Calls `f` with every strictly increasing `k`-tuple of indices in
/// `start..n`, in lexicographic order.
pub(crate) fn for_each_combination(start: usize, n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 {
        f(&[]);
        return;
    }
    if n < start || n - start < k {
        return;
    }
    let mut idx: Vec<usize> = (start..start + k).collect();
    loop {
        f(&idx);
        // advance the rightmost index that still has room
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < n - k + pos {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return;
            }
        }
    }
}

/// Sorted multiset of all `C(n, m)` kernel evaluations; the support of `H_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelValueSet {
    sorted: Vec<f64>,
    n: usize,
    m: usize,
}

impl KernelValueSet {
    /// Builds from unsorted values (sorted here).
    pub fn from_values(mut values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(GlError::Argument("kernel value set cannot be empty".into()));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: values, n, m })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Number of values `<= t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.sorted.partition_point(|&v| v <= t)
    }

    /// `H_n(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.count_le(t) as f64 / self.sorted.len() as f64
    }

    /// k-th smallest value, 1-based.
    pub fn kth(&self, k: usize) -> f64 {
        self.sorted[k.clamp(1, self.sorted.len()) - 1]
    }

    /// `H_n^{-1}(p) = inf{t : H_n(t) >= p}`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.quantile_with(p, QuantileConvention::Ceil)
    }

    pub fn quantile_with(&self, p: f64, convention: QuantileConvention) -> f64 {
        self.kth(rank_for(p, self.sorted.len(), convention))
    }

    /// One value per line, header `h`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "h")?;
        for v in &self.sorted {
            writeln!(out, "{}", crate::fmt_g17(*v))?;
        }
        Ok(())
    }

    /// Little-endian 8-byte floats, no header.
    pub fn write_le_bytes<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.sorted {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// All `C(n, m)` kernel values, sorted, with the default cap.
pub fn kernel_values(sample: &Sample, kernel: &KernelSpec) -> Result<KernelValueSet> {
    kernel_values_with_cap(sample, kernel, DEFAULT_ENUMERATION_CAP)
}

pub fn kernel_values_with_cap(
    sample: &Sample,
    kernel: &KernelSpec,
    cap: u128,
) -> Result<KernelValueSet> {
    let m = kernel.m();
    let n = sample.len();
    sample.require(m)?;
    check_capacity("kernel value enumeration", binom(n, m), cap)?;
    let x = sample.values();
    let values: Vec<f64> = if m == 1 {
        x.iter().map(|&v| kernel.eval_unchecked(&[v])).collect()
    } else {
        // split on the first index; the concatenation order is fixed, and the
        // sort below is total, so the output does not depend on thread count
        (0..=n - m)
            .into_par_iter()
            .flat_map_iter(|first| {
                let mut buf = vec![0.0; m];
                buf[0] = x[first];
                let mut out = Vec::with_capacity(binom(n - first - 1, m - 1).min(1 << 24) as usize);
                for_each_combination(first + 1, n, m - 1, |rest| {
                    for (slot, &i) in buf[1..].iter_mut().zip(rest) {
                        *slot = x[i];
                    }
                    out.push(kernel.eval_unchecked(&buf));
                });
                out
            })
            .collect()
    };
    KernelValueSet::from_values(values, n, m)
}

/// Gini mean difference from sorted data via the order-statistic identity.
pub(crate) fn gini_from_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (2.0 * (i as f64 + 1.0) - n - 1.0) * v)
        .sum();
    2.0 * weighted / (n * (n - 1.0))
}

/// `U_n`, the mean of `h` over all `m`-subsets. Uses closed forms for the
/// Gini and identity kernels.
pub fn u_statistic(sample: &Sample, kernel: &KernelSpec) -> Result<f64> {
    sample.require(kernel.m())?;
    match kernel.kind() {
        KernelKind::GiniAbsDiff => Ok(gini_from_sorted(&sample.sorted())),
        KernelKind::Identity => Ok(mean(sample.values())),
        _ => u_statistic_enumerated(sample, kernel),
    }
}

/// `U_n` by explicit enumeration, regardless of the kernel.
pub fn u_statistic_enumerated(sample: &Sample, kernel: &KernelSpec) -> Result<f64> {
    let m = kernel.m();
    sample.require(m)?;
    let count = binom(sample.len(), m);
    check_capacity("U-statistic enumeration", count, DEFAULT_ENUMERATION_CAP)?;
    Ok(subset_sum(sample.values(), m, |args| kernel.eval_unchecked(args)) / count as f64)
}

/// Sum of `phi` over all strictly increasing `m`-subsets of `x`.
pub(crate) fn subset_sum(x: &[f64], m: usize, phi: impl Fn(&[f64]) -> f64) -> f64 {
    let mut buf = vec![0.0; m];
    let mut total = 0.0;
    for_each_combination(0, x.len(), m, |idx| {
        for (slot, &i) in buf.iter_mut().zip(idx) {
            *slot = x[i];
        }
        total += phi(&buf);
    });
    total
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `H_n(t)`, the fraction of kernel values `<= t`.
pub fn empirical_u_cdf(sample: &Sample, kernel: &KernelSpec, t: f64) -> Result<f64> {
    Ok(kernel_values(sample, kernel)?.cdf(t))
}

/// `H_n^{-1}(p)` with `k = ceil(p N)` clamped to `[1, N]`.
pub fn u_quantile(sample: &Sample, kernel: &KernelSpec, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(GlError::Argument(format!("quantile level must lie in (0, 1], got {p}")));
    }
    Ok(kernel_values(sample, kernel)?.quantile(p))
}

/// `F_n(x)`.
pub fn empirical_cdf(sample: &Sample, x: f64) -> Result<f64> {
    sample.require(1)?;
    let count = sample.values().iter().filter(|&&v| v <= x).count();
    Ok(count as f64 / sample.len() as f64)
}

/// First sum of an empirical first Hoeffding projection of a symmetric
/// function `phi` of dimension `m`: `Σ phi(point, X_{i_1}, ..., X_{i_{m-1}})`
/// over all `(m-1)`-subsets of the full sample, with no exclusion of the
/// index whose value equals the evaluation point.
pub(crate) struct Projection<'a, F> {
    pub(crate) x: &'a [f64],
    pub(crate) m: usize,
    pub(crate) phi: F,
}

impl<F> Projection<'_, F>
where
    F: Fn(&[f64]) -> f64,
{
    pub(crate) fn first_sum(&self, point: f64) -> f64 {
        let mut buf = vec![0.0; self.m];
        buf[0] = point;
        let mut total = 0.0;
        for_each_combination(0, self.x.len(), self.m - 1, |idx| {
            for (slot, &i) in buf[1..].iter_mut().zip(idx) {
                *slot = self.x[i];
            }
            total += (self.phi)(&buf);
        });
        total
    }
}

pub(crate) fn denominators(n: usize, m: usize, norm: Normalization) -> (f64, f64) {
    match norm {
        Normalization::Combinatorial => (binom(n, m - 1) as f64, binom(n, m) as f64),
        Normalization::PaperLiteral => ((n as f64).powi(m as i32 - 1), (n as f64).powi(m as i32)),
    }
}

/// Evaluates `ĝ_1` of `kernel` on `sample`, reusing the centering term across
/// evaluation points. Closed forms are used for the Gini and identity kernels.
pub struct G1Estimator<'a> {
    sample: &'a Sample,
    kernel: &'a KernelSpec,
    norm: Normalization,
    first_denom: f64,
    center: f64,
    prefix: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> G1Estimator<'a> {
    pub fn new(sample: &'a Sample, kernel: &'a KernelSpec, norm: Normalization) -> Result<Self> {
        let m = kernel.m();
        sample.require(m)?;
        let n = sample.len();
        let (first_denom, center_denom) = denominators(n, m, norm);
        let mut prefix = None;
        let centering_sum = match kernel.kind() {
            KernelKind::Identity => sample.values().iter().sum(),
            KernelKind::GiniAbsDiff => {
                let sorted = sample.sorted();
                let sum = gini_from_sorted(&sorted) * binom(n, 2) as f64;
                let mut cum = Vec::with_capacity(n + 1);
                cum.push(0.0);
                let mut acc = 0.0;
                for v in &sorted {
                    acc += v;
                    cum.push(acc);
                }
                prefix = Some((sorted, cum));
                sum
            }
            _ => {
                check_capacity(
                    "first projection enumeration",
                    binom(n, m).saturating_add(binom(n, m - 1).saturating_mul(n as u128)),
                    DEFAULT_ENUMERATION_CAP,
                )?;
                subset_sum(sample.values(), m, |a| kernel.eval_unchecked(a))
            }
        };
        Ok(Self {
            sample,
            kernel,
            norm,
            first_denom,
            center: centering_sum / center_denom,
            prefix,
        })
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    /// `ĝ_1(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let first = match (self.kernel.kind(), &self.prefix) {
            (KernelKind::Identity, _) => x,
            (KernelKind::GiniAbsDiff, Some((sorted, cum))) => {
                let below = sorted.partition_point(|&v| v <= x);
                let n = sorted.len();
                let total = cum[n];
                (x * below as f64 - cum[below]) + ((total - cum[below]) - x * (n - below) as f64)
            }
            _ => {
                let kernel = self.kernel;
                Projection {
                    x: self.sample.values(),
                    m: kernel.m(),
                    phi: |a: &[f64]| kernel.eval_unchecked(a),
                }
                .first_sum(x)
            }
        };
        first / self.first_denom - self.center
    }

    /// `ĝ_1(X_i)` for every sample point, in sample order.
    pub fn at_sample(&self) -> Vec<f64> {
        self.sample.values().par_iter().map(|&x| self.eval(x)).collect()
    }
}

/// `ĝ_1(x)`; see [`G1Estimator`] for repeated evaluation.
pub fn hoeffding_g1_hat(
    sample: &Sample,
    kernel: &KernelSpec,
    x: f64,
    normalization: Normalization,
) -> Result<f64> {
    if !x.is_finite() {
        return Err(GlError::Domain(format!("evaluation point {x} is not finite")));
    }
    Ok(G1Estimator::new(sample, kernel, normalization)?.eval(x))
}

/// Exact Hoeffding decomposition of a kernel under a finite-support law,
/// computed by exhaustive enumeration. Intended as a test oracle.
///
/// Function tables are indexed by atom-index tuples in mixed radix
/// (`idx[0]` most significant).
#[derive(Clone, Debug)]
pub struct PopulationHoeffding {
    atoms: Vec<f64>,
    probs: Vec<f64>,
    m: usize,
    theta: f64,
    /// `h_tilde[j-1]` has `s^j` entries.
    h_tilde: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
}

impl PopulationHoeffding {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.atoms.len() + i)
    }

    /// Kernel value at the atoms selected by `idx` (length m).
    pub fn h(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.m);
        self.h[self.flat(idx)]
    }

    /// `h̃_j`, j = idx.len().
    pub fn h_tilde(&self, idx: &[usize]) -> f64 {
        self.h_tilde[idx.len() - 1][self.flat(idx)]
    }

    /// `g_j`, j = idx.len().
    pub fn g(&self, idx: &[usize]) -> f64 {
        self.g[idx.len() - 1][self.flat(idx)]
    }

    /// `θ + Σ_j Σ_{|S| = j} g_j(x_S)` at an m-tuple of atom indices.
    pub fn reconstruct(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.m);
        self.theta + sum_over_proper_subsets(idx, self.m + 1, |sub| self.g(sub))
    }
}

/// Sums `f` over every non-empty subset of `idx` of size `< limit`,
/// preserving order within each subset.
fn sum_over_proper_subsets(idx: &[usize], limit: usize, f: impl Fn(&[usize]) -> f64) -> f64 {
    let j = idx.len();
    let mut total = 0.0;
    let mut sub = Vec::with_capacity(j);
    for mask in 1u32..(1u32 << j) {
        if (mask.count_ones() as usize) >= limit {
            continue;
        }
        sub.clear();
        sub.extend((0..j).filter(|b| mask & (1 << b) != 0).map(|b| idx[b]));
        total += f(&sub);
    }
    total
}

fn decode(mut flat: usize, len: usize, s: usize, out: &mut [usize]) {
    for pos in (0..len).rev() {
        out[pos] = flat % s;
        flat /= s;
    }
}

/// Decomposes `kernel` under the law `Σ p_k δ_{a_k}` given as `(a_k, p_k)`.
pub fn hoeffding_decompose_population(
    support: &[(f64, f64)],
    kernel: &KernelSpec,
) -> Result<PopulationHoeffding> {
    const CAP: u128 = 10_000_000;
    if support.is_empty() {
        return Err(GlError::Argument("support must contain at least one atom".into()));
    }
    if support.iter().any(|&(a, p)| !a.is_finite() || !(p > 0.0)) {
        return Err(GlError::Argument(
            "atoms must be finite with strictly positive probabilities".into(),
        ));
    }
    let total: f64 = support.iter().map(|&(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(GlError::Argument(format!("probabilities sum to {total}, not 1")));
    }
    let m = kernel.m();
    if m > 20 {
        return Err(GlError::Argument("population decomposition supports m <= 20".into()));
    }
    let s = support.len();
    let cells = (s as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    check_capacity("population Hoeffding enumeration", cells, CAP)?;
    let cells = cells as usize;
    let atoms: Vec<f64> = support.iter().map(|&(a, _)| a).collect();
    let probs: Vec<f64> = support.iter().map(|&(_, p)| p).collect();

    let mut idx = vec![0usize; m];
    let mut args = vec![0.0; m];
    let h: Vec<f64> = (0..cells)
        .map(|flat| {
            decode(flat, m, s, &mut idx);
            for (a, &i) in args.iter_mut().zip(&idx) {
                *a = atoms[i];
            }
            kernel.eval_unchecked(&args)
        })
        .collect();

    // conditional expectations E[h | first j coordinates], j = m down to 0
    let mut cond: Vec<Vec<f64>> = vec![Vec::new(); m + 1];
    cond[m] = h.clone();
    for j in (0..m).rev() {
        let upper = &cond[j + 1];
        cond[j] = (0..s.pow(j as u32))
            .map(|flat| (0..s).map(|y| probs[y] * upper[flat * s + y]).sum())
            .collect();
    }
    let theta = cond[0][0];

    let mut h_tilde = Vec::with_capacity(m);
    let mut g: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 1..=m {
        let ht: Vec<f64> = cond[j].iter().map(|v| v - theta).collect();
        let mut tuple = vec![0usize; j];
        let gj: Vec<f64> = (0..ht.len())
            .map(|flat| {
                decode(flat, j, s, &mut tuple);
                let lower = sum_over_proper_subsets(&tuple, j, |sub| {
                    let f = sub.iter().fold(0, |acc, &i| acc * s + i);
                    g[sub.len() - 1][f]
                });
                ht[flat] - lower
            })
            .collect();
        h_tilde.push(ht);
        g.push(gj);
    }

    Ok(PopulationHoeffding {
        atoms,
        probs,
        m,
        theta,
        h_tilde,
        g,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn binom_values() {
        assert_eq!(binom(5, 2), 10);
        assert_eq!(binom(12, 3), 220);
        assert_eq!(binom(3, 5), 0);
        assert_eq!(binom(1000, 3), 166_167_000);
        assert_eq!(binom(10_000, 5000), u128::MAX);
    }

    #[test]
    fn combination_enumeration_counts() {
        for n in 0..9 {
            for k in 0..=n {
                let mut count = 0u128;
                let mut last: Option<Vec<usize>> = None;
                for_each_combination(0, n, k, |c| {
                    assert!(c.windows(2).all(|w| w[0] < w[1]));
                    if let Some(prev) = &last {
                        assert!(prev.as_slice() < c);
                    }
                    last = Some(c.to_vec());
                    count += 1;
                });
                assert_eq!(count, binom(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn sample_rejects_non_finite() {
        assert!(matches!(Sample::new(vec![1.0, f64::NAN]), Err(GlError::Domain(_))));
    }

    #[test]
    fn u_statistic_examples() {
        let g = KernelSpec::gini();
        assert!((u_statistic_enumerated(&s(&[0.0, 1.0, 2.0]), &g).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((u_statistic(&s(&[0.0, 1.0, 2.0]), &g).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let q = KernelSpec::min_pairwise(3).unwrap();
        assert_eq!(u_statistic(&s(&[2.5; 6]), &q).unwrap(), 0.0);
        assert!(matches!(
            u_statistic(&s(&[1.0, 2.0]), &q),
            Err(GlError::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn kernel_values_examples() {
        let kv = kernel_values(&s(&[0.0, 1.0, 2.0]), &KernelSpec::gini()).unwrap();
        assert_eq!(kv.values(), &[1.0, 1.0, 2.0]);
        let kv = kernel_values(&s(&[0.0, 1.0, 3.0]), &KernelSpec::min_pairwise(3).unwrap()).unwrap();
        assert_eq!(kv.values(), &[1.0]);
        let kv = kernel_values(&s(&[5.0]), &KernelSpec::identity()).unwrap();
        assert_eq!(kv.values(), &[5.0]);
    }

    #[test]
    fn kernel_values_capacity() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        let err = kernel_values_with_cap(&s(&x), &KernelSpec::min_pairwise(3).unwrap(), 1000).unwrap_err();
        assert!(matches!(err, GlError::Capacity { count: 19600, .. }));
        assert!(err.to_string().contains("subsampled"));
    }

    #[test]
    fn cdf_and_quantile_examples() {
        let g = KernelSpec::gini();
        let x = s(&[0.0, 1.0, 2.0]);
        assert!((empirical_u_cdf(&x, &g, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_u_cdf(&x, &g, -1e300).unwrap(), 0.0);
        assert_eq!(empirical_u_cdf(&x, &g, 2.0).unwrap(), 1.0);
        assert_eq!(u_quantile(&x, &g, 0.5).unwrap(), 1.0);
        assert_eq!(u_quantile(&x, &g, 1.0).unwrap(), 2.0);
        let q = KernelSpec::min_pairwise(3).unwrap();
        assert_eq!(u_quantile(&s(&[0.0, 1.0, 3.0]), &q, 0.5).unwrap(), 1.0);
        assert!(u_quantile(&x, &g, 0.0).is_err());
        assert!(u_quantile(&x, &g, 1.5).is_err());
    }

    #[test]
    fn rank_snapping() {
        assert_eq!(rank_for(2.0 / 3.0, 3, QuantileConvention::Ceil), 2);
        assert_eq!(rank_for(0.5, 4, QuantileConvention::FloorBracket), 2);
        assert_eq!(rank_for(0.1, 4, QuantileConvention::FloorBracket), 1);
        assert_eq!(rank_for(0.1, 4, QuantileConvention::Ceil), 1);
        assert_eq!(rank_for(1.0, 7, QuantileConvention::Ceil), 7);
    }

    #[test]
    fn empirical_cdf_examples() {
        let x = s(&[0.0, 1.0, 2.0]);
        assert!((empirical_cdf(&x, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_cdf(&x, -1.0).unwrap(), 0.0);
        assert_eq!(empirical_cdf(&x, 5.0).unwrap(), 1.0);
        assert!(empirical_cdf(&s(&[]), 0.0).is_err());
    }

    #[test]
    fn g1_hat_examples() {
        let g = KernelSpec::gini();
        let v = hoeffding_g1_hat(&s(&[0.0, 1.0]), &g, 0.0, Normalization::Combinatorial).unwrap();
        assert!((v + 0.5).abs() < 1e-15);
        let v = hoeffding_g1_hat(&s(&[0.0, 1.0, 2.0]), &g, 2.0, Normalization::Combinatorial).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-15);
        for k in [KernelSpec::gini(), KernelSpec::min_pairwise(3).unwrap(), KernelSpec::range(4).unwrap()] {
            for norm in [Normalization::Combinatorial, Normalization::PaperLiteral] {
                // zero at the constant itself; off the sample the first sum sees h(x, c, ..)
                assert_eq!(hoeffding_g1_hat(&s(&[1.5; 7]), &k, 1.5, norm).unwrap(), 0.0);
                let off = hoeffding_g1_hat(&s(&[1.5; 7]), &k, 0.3, Normalization::Combinatorial).unwrap();
                let mut args = vec![1.5; k.m()];
                args[0] = 0.3;
                assert!((off - k.eval(&args).unwrap()).abs() < 1e-15);
            }
        }
        assert!(hoeffding_g1_hat(&s(&[1.0]), &g, 0.0, Normalization::Combinatorial).is_err());
    }

    #[test]
    fn population_examples() {
        let g = KernelSpec::gini();
        let pop = hoeffding_decompose_population(&[(0.0, 0.5), (1.0, 0.5)], &g).unwrap();
        assert!((pop.theta() - 0.5).abs() < 1e-15);
        assert!(pop.g(&[0]).abs() < 1e-15);
        assert!(pop.g(&[1]).abs() < 1e-15);

        let q = KernelSpec::min_pairwise(3).unwrap();
        let pop = hoeffding_decompose_population(&[(2.0, 1.0)], &q).unwrap();
        assert_eq!(pop.theta(), 0.0);
        assert_eq!(pop.g(&[0]), 0.0);
        assert_eq!(pop.g(&[0, 0, 0]), 0.0);

        assert!(hoeffding_decompose_population(&[(0.0, 0.5), (1.0, 0.4)], &g).is_err());
        assert!(hoeffding_decompose_population(&[(0.0, 1.0), (1.0, 0.0)], &g).is_err());
    }

    #[test]
    fn population_degeneracy_m3() {
        let support = [(0.0, 0.2), (0.7, 0.3), (1.9, 0.1), (3.0, 0.4)];
        for k in [KernelSpec::min_pairwise(3).unwrap(), KernelSpec::range(3).unwrap()] {
            let pop = hoeffding_decompose_population(&support, &k).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        let idx = [a, b, c];
                        assert!((pop.reconstruct(&idx) - pop.h(&idx)).abs() < 1e-12);
                        let e3: f64 = (0..4).map(|y| pop.probs()[y] * pop.g(&[a, b, y])).sum();
                        assert!(e3.abs() < 1e-12);
                    }
                    let e2: f64 = (0..4).map(|y| pop.probs()[y] * pop.g(&[a, y])).sum();
                    assert!(e2.abs() < 1e-12);
                }
            }
            let e1: f64 = (0..4).map(|y| pop.probs()[y] * pop.g(&[y])).sum();
            assert!(e1.abs() < 1e-12);
        }
    }

    #[test]
    fn value_set_dumps() {
        let kv = kernel_values(&s(&[0.0, 1.0, 2.0]), &KernelSpec::gini()).unwrap();
        let mut csv = Vec::new();
        kv.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "h\n1\n1\n2\n");
        let mut bytes = Vec::new();
        kv.write_le_bytes(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 24);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2.0);
    }

    proptest! {
        #[test]
        fn h_n_is_a_cdf(x in proptest::collection::vec(-50.0f64..50.0, 3..12), t in -200.0f64..200.0) {
            let k = KernelSpec::min_pairwise(3).unwrap();
            let kv = kernel_values(&Sample::new(x).unwrap(), &k).unwrap();
            let c = kv.cdf(t);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(kv.cdf(t + 1.0) >= c);
            prop_assert_eq!(kv.cdf(kv.min() - 1.0), 0.0);
            prop_assert_eq!(kv.cdf(kv.max()), 1.0);
            let steps = c * kv.len() as f64;
            prop_assert!((steps - steps.round()).abs() < 1e-9);
        }

        #[test]
        fn quantile_cdf_consistency(x in proptest::collection::vec(-5.0f64..5.0, 2..25)) {
            let kv = kernel_values(&Sample::new(x).unwrap(), &KernelSpec::gini()).unwrap();
            for (i, &v) in kv.values().iter().enumerate() {
                let q = kv.quantile(kv.cdf(v));
                prop_assert!(q <= v);
                let first_at_level = i == 0 || kv.values()[i - 1] < v;
                if first_at_level {
                    prop_assert_eq!(q, v);
                }
            }
        }

        #[test]
        fn fast_gini_matches_enumeration(x in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            let x = Sample::new(x).unwrap();
            let fast = u_statistic(&x, &KernelSpec::gini()).unwrap();
            let slow = u_statistic_enumerated(&x, &KernelSpec::gini()).unwrap();
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1e-300));
        }

        // the evaluation index is not excluded from the first sum, so the
        // average over the sample is the diagonal correction
        // (1/n^2) sum_i h(X_i, X_i) - U_n / n rather than zero
        #[test]
        fn g1_hat_sample_average(x in proptest::collection::vec(-10.0f64..10.0, 2..40)) {
            let x = Sample::new(x).unwrap();
            let n = x.len() as f64;
            let gini = KernelSpec::gini();
            let est = G1Estimator::new(&x, &gini, Normalization::Combinatorial).unwrap();
            let avg = mean(&est.at_sample());
            let u = u_statistic(&x, &KernelSpec::gini()).unwrap();
            prop_assert!((avg + u / n).abs() < 1e-12);

            let range = KernelSpec::custom("half_sum", 2, |a| 0.5 * (a[0] + a[1])).unwrap();
            let est = G1Estimator::new(&x, &range, Normalization::Combinatorial).unwrap();
            let avg = mean(&est.at_sample());
            let diag: f64 = x.values().iter().sum::<f64>() / (n * n);
            let u = u_statistic(&x, &range).unwrap();
            prop_assert!((avg - (diag - u / n)).abs() < 1e-12);
        }
    }
}
