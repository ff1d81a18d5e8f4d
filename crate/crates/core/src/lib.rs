//! Generalized L-statistics built on multivariate U-statistics, with
//! long-run variance estimation for dependent data, EGARCH/GARCH/AR(1)
//! simulators and a reproducible Monte Carlo harness.
//!
//! Module map:
//! - [`kernels`]: symmetric kernels and the built-in catalog
//! - [`ustat`]: U-statistics, `H_n`, U-quantiles, first Hoeffding projection
//! - [`glstat`]: the GL functional and the scale-estimator catalog
//! - [`lrv`]: long-run variance of U- and GL-statistics, confidence intervals
//! - [`processes`]: innovation, GARCH(1,1) and EGARCH(p,q) simulators
//! - [`mc`]: Monte Carlo experiments and their on-disk reports
//! - [`cli`]: the `glstat` command-line front end

pub mod cli;
pub mod error;
pub mod glstat;
pub mod kernels;
pub mod lrv;
pub mod mc;
pub mod processes;
pub mod ustat;

pub use error::{GlError, Result};
pub use glstat::{Estimator, GLSpec, WeightFunctionJ};
pub use kernels::KernelSpec;
pub use ustat::{KernelValueSet, Normalization, Sample};

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed,
/// scientific notation outside `[1e-5, 1e17)`. Enough digits to round-trip
/// every finite double.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
