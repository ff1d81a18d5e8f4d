//! Symmetric kernels `h(x_1, ..., x_m)` and the built-in catalog.
//!
//! Every estimator in the crate is driven by a [`KernelSpec`]. The built-in
//! kernels are the absolute difference (Gini), the minimum pairwise distance
//! (Q-type estimators), the range (C-type estimators) and the identity
//! (order-statistic forms). Custom kernels use the same shape; symmetry is
//! the caller's obligation and is spot-checked in debug builds.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{GlError, Result};

/// Evaluation rule of a kernel.
#[derive(Clone)]
pub enum KernelKind {
    /// `|x_1 - x_2|`, m = 2.
    GiniAbsDiff,
    /// `min_{i<j} |x_i - x_j|`.
    MinPairwise,
    /// `max(x) - min(x)`.
    Range,
    /// `x_1`, m = 1.
    Identity,
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::GiniAbsDiff => f.write_str("GiniAbsDiff"),
            KernelKind::MinPairwise => f.write_str("MinPairwise"),
            KernelKind::Range => f.write_str("Range"),
            KernelKind::Identity => f.write_str("Identity"),
            KernelKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A symmetric kernel of fixed dimension `m`. Immutable once built.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    name: String,
    m: usize,
    params: BTreeMap<String, f64>,
    kind: KernelKind,
}

impl KernelSpec {
    pub fn gini() -> Self {
        Self {
            name: "gini_abs_diff".into(),
            m: 2,
            params: BTreeMap::new(),
            kind: KernelKind::GiniAbsDiff,
        }
    }

    pub fn identity() -> Self {
        Self {
            name: "identity".into(),
            m: 1,
            params: BTreeMap::new(),
            kind: KernelKind::Identity,
        }
    }

    pub fn min_pairwise(m: usize) -> Result<Self> {
        check_multivariate_m("min_pairwise", m)?;
        Ok(Self {
            name: "min_pairwise".into(),
            m,
            params: BTreeMap::from([("m".to_string(), m as f64)]),
            kind: KernelKind::MinPairwise,
        })
    }

    pub fn range(m: usize) -> Result<Self> {
        check_multivariate_m("range", m)?;
        Ok(Self {
            name: "range".into(),
            m,
            params: BTreeMap::from([("m".to_string(), m as f64)]),
            kind: KernelKind::Range,
        })
    }

    /// Wraps a caller-supplied rule. In debug builds the rule is evaluated on
    /// a handful of fixed vectors and their permutations and rejected if it is
    /// visibly asymmetric.
    pub fn custom<F>(name: impl Into<String>, m: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if m == 0 {
            return Err(GlError::Argument("kernel dimension must be at least 1".into()));
        }
        let spec = Self {
            name: name.into(),
            m,
            params: BTreeMap::from([("m".to_string(), m as f64)]),
            kind: KernelKind::Custom(Arc::new(eval)),
        };
        #[cfg(debug_assertions)]
        spec.spot_check_symmetry()?;
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn is_gini(&self) -> bool {
        matches!(self.kind, KernelKind::GiniAbsDiff)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, KernelKind::Identity)
    }

    /// Evaluates `h(args)` after checking the dimension and finiteness.
    pub fn eval(&self, args: &[f64]) -> Result<f64> {
        if args.len() != self.m {
            return Err(GlError::Argument(format!(
                "kernel `{}` has dimension {}, got {} arguments",
                self.name,
                self.m,
                args.len()
            )));
        }
        if let Some(bad) = args.iter().find(|v| !v.is_finite()) {
            return Err(GlError::Domain(format!(
                "kernel `{}` received non-finite argument {bad}",
                self.name
            )));
        }
        let v = self.eval_unchecked(args);
        if !v.is_finite() {
            return Err(GlError::Domain(format!(
                "kernel `{}` produced non-finite value {v}",
                self.name
            )));
        }
        Ok(v)
    }

    /// Evaluates without validation. Callers guarantee `args.len() == m` and
    /// finite entries (samples are validated at construction).
    #[inline]
    pub fn eval_unchecked(&self, args: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::GiniAbsDiff => (args[0] - args[1]).abs(),
            KernelKind::Identity => args[0],
            KernelKind::Range => {
                let (lo, hi) = args
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                hi - lo
            }
            KernelKind::MinPairwise => min_pairwise_distance(args),
            KernelKind::Custom(f) => f(args),
        }
    }

    #[cfg(debug_assertions)]
    fn spot_check_symmetry(&self) -> Result<()> {
        const PROBES: [f64; 8] = [0.3, -1.7, 2.25, 0.0, 5.5, -0.4, 1.1, 3.9];
        for shift in 0..3 {
            let args: Vec<f64> = (0..self.m)
                .map(|i| PROBES[(i + shift) % PROBES.len()] * (1.0 + i as f64))
                .collect();
            let base = self.eval_unchecked(&args);
            let mut reversed = args.clone();
            reversed.reverse();
            let mut rotated = args.clone();
            rotated.rotate_left(1);
            for perm in [reversed, rotated] {
                let v = self.eval_unchecked(&perm);
                let scale = base.abs().max(v.abs()).max(1.0);
                if (v - base).abs() > 1e-9 * scale {
                    return Err(GlError::Argument(format!(
                        "custom kernel `{}` is not symmetric: h({args:?}) = {base}, h({perm:?}) = {v}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_multivariate_m(name: &str, m: usize) -> Result<()> {
    if m < 2 {
        return Err(GlError::Argument(format!(
            "kernel `{name}` needs dimension m >= 2, got {m}"
        )));
    }
    Ok(())
}

fn min_pairwise_distance(args: &[f64]) -> f64 {
    if args.len() <= 8 {
        let mut best = f64::INFINITY;
        for i in 0..args.len() {
            for j in (i + 1)..args.len() {
                best = best.min((args[i] - args[j]).abs());
            }
        }
        best
    } else {
        // the closest pair is adjacent after sorting; float subtraction is
        // monotone so this matches the all-pairs minimum exactly
        let mut sorted = args.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Looks up a built-in kernel by name. `min_pairwise` and `range` read their
/// dimension from `params["m"]`.
pub fn builtin_kernel(name: &str, params: &BTreeMap<String, f64>) -> Result<KernelSpec> {
    let m_param = || -> Result<usize> {
        let m = params.get("m").copied().ok_or_else(|| {
            GlError::Argument(format!("kernel `{name}` requires parameter m"))
        })?;
        if !(m.is_finite() && m >= 0.0 && m.fract() == 0.0) {
            return Err(GlError::Argument(format!(
                "kernel `{name}`: m must be a non-negative integer, got {m}"
            )));
        }
        Ok(m as usize)
    };
    match name {
        "gini_abs_diff" | "gini" => Ok(KernelSpec::gini()),
        "identity" => Ok(KernelSpec::identity()),
        "min_pairwise" => KernelSpec::min_pairwise(m_param()?),
        "range" => KernelSpec::range(m_param()?),
        other => Err(GlError::UnknownKernel(other.to_string())),
    }
}

/// Shorthand for [`KernelSpec::eval`].
pub fn eval_kernel(kernel: &KernelSpec, args: &[f64]) -> Result<f64> {
    kernel.eval(args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn m3() -> BTreeMap<String, f64> {
        BTreeMap::from([("m".to_string(), 3.0)])
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_kernel(&KernelSpec::gini(), &[3.0, 1.0]).unwrap(), 2.0);
        let q = builtin_kernel("min_pairwise", &m3()).unwrap();
        assert_eq!(q.eval(&[0.0, 1.0, 3.0]).unwrap(), 1.0);
        let r = builtin_kernel("range", &m3()).unwrap();
        assert_eq!(r.eval(&[0.0, 1.0, 3.0]).unwrap(), 3.0);
    }

    #[test]
    fn builtin_dimensions() {
        let empty = BTreeMap::new();
        assert_eq!(builtin_kernel("gini_abs_diff", &empty).unwrap().m(), 2);
        assert_eq!(builtin_kernel("min_pairwise", &m3()).unwrap().m(), 3);
        assert_eq!(builtin_kernel("identity", &empty).unwrap().m(), 1);
    }

    #[test]
    fn builtin_errors() {
        let empty = BTreeMap::new();
        assert!(matches!(
            builtin_kernel("hodges", &empty),
            Err(GlError::UnknownKernel(_))
        ));
        assert!(builtin_kernel("range", &empty).is_err());
        let one = BTreeMap::from([("m".to_string(), 1.0)]);
        assert!(builtin_kernel("min_pairwise", &one).is_err());
        let frac = BTreeMap::from([("m".to_string(), 2.5)]);
        assert!(builtin_kernel("range", &frac).is_err());
    }

    #[test]
    fn eval_rejects_bad_input() {
        let g = KernelSpec::gini();
        assert!(matches!(g.eval(&[1.0]), Err(GlError::Argument(_))));
        assert!(matches!(g.eval(&[1.0, f64::NAN]), Err(GlError::Domain(_))));
        assert!(matches!(
            g.eval(&[f64::INFINITY, 0.0]),
            Err(GlError::Domain(_))
        ));
    }

    #[test]
    fn builtins_are_permutation_invariant() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let kernels = [
            KernelSpec::gini(),
            KernelSpec::identity(),
            KernelSpec::min_pairwise(3).unwrap(),
            KernelSpec::min_pairwise(12).unwrap(),
            KernelSpec::range(4).unwrap(),
        ];
        for k in &kernels {
            for _ in 0..200 {
                let args: Vec<f64> = (0..k.m()).map(|_| rng.random_range(-10.0..10.0)).collect();
                let base = k.eval(&args).unwrap();
                for _ in 0..5 {
                    let mut p = args.clone();
                    p.shuffle(&mut rng);
                    assert_eq!(k.eval(&p).unwrap(), base, "{}", k.name());
                }
            }
        }
    }

    #[test]
    fn nonnegativity_and_zero_diagonal() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let q = KernelSpec::min_pairwise(4).unwrap();
        let r = KernelSpec::range(5).unwrap();
        for _ in 0..500 {
            let x: f64 = rng.random_range(-100.0..100.0);
            assert_eq!(KernelSpec::gini().eval(&[x, x]).unwrap(), 0.0);
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert!(q.eval(&a).unwrap() >= 0.0);
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert!(r.eval(&b).unwrap() >= 0.0);
        }
    }

    #[test]
    fn lipschitz_spot_check() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kernels = [
            KernelSpec::gini(),
            KernelSpec::identity(),
            KernelSpec::min_pairwise(3).unwrap(),
            KernelSpec::range(3).unwrap(),
        ];
        for k in &kernels {
            for _ in 0..10_000 {
                let a: Vec<f64> = (0..k.m()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..k.m()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let dist = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                let diff = (k.eval(&a).unwrap() - k.eval(&b).unwrap()).abs();
                assert!(diff <= 2.0 * dist + 1e-12, "{}: {diff} > 2*{dist}", k.name());
            }
        }
    }

    #[test]
    fn large_m_min_pairwise_matches_all_pairs() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut brute = f64::INFINITY;
            for i in 0..a.len() {
                for j in (i + 1)..a.len() {
                    brute = brute.min((a[i] - a[j]).abs());
                }
            }
            assert_eq!(min_pairwise_distance(&a), brute);
        }
    }

    #[test]
    fn custom_kernel_symmetry_check() {
        let ok = KernelSpec::custom("sum", 3, |a| a.iter().sum());
        assert!(ok.is_ok());
        #[cfg(debug_assertions)]
        {
            let bad = KernelSpec::custom("first_minus_second", 2, |a| a[0] - a[1]);
            assert!(bad.is_err());
        }
    }
}
