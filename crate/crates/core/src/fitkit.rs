//! One-parameter least-squares fit of `r` to `P0(t)` samples and the
//! resulting eigenvalue curve `E± = ±√(1 − r²)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{csv_error, csv_writer, flush_error, fmt_f64};
use crate::numkit::C64;
use crate::ptmodel::p0_unchecked;

/// Step of the coarse scan over `r`.
pub const SCAN_STEP: f64 = 1e-3;
/// Width at which the golden-section refinement stops.
pub const REFINE_TOL: f64 = 1e-6;
/// Step of the central difference for the curvature of the SSE.
pub const CURVATURE_STEP: f64 = 1e-4;

/// Nominal `r` values of the reference experiment.
pub const NOMINAL_R: [f64; 16] =
    [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5];
/// Fitted `r_exp` reported for the reference experiment.
pub const MEASURED_R_EXP: [f64; 16] = [
    0.006, 0.099, 0.191, 0.328, 0.416, 0.472, 0.616, 0.713, 0.800, 0.906, 1.002, 1.079, 1.170, 1.321, 1.418, 1.509,
];
/// Fitting errors reported for the reference experiment.
pub const MEASURED_STDERR: [f64; 16] = [
    0.018, 0.024, 0.014, 0.016, 0.009, 0.015, 0.006, 0.006, 0.003, 0.006, 0.010, 0.015, 0.021, 0.019, 0.038, 0.001,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub r_exp: f64,
    /// Infinite when the curvature is degenerate.
    pub stderr: f64,
    pub sse: f64,
    pub n_samples: usize,
    pub e_plus: C64,
    pub e_minus: C64,
    /// Second derivative of the SSE at the minimum.
    pub curvature: f64,
    pub degenerate: bool,
}

impl FitResult {
    /// The error [`fit_r`] would raise if degenerate fits were rejected.
    pub fn curvature_error(&self) -> Option<Error> {
        self.degenerate.then_some(Error::DegenerateCurvature { curvature: self.curvature })
    }
}

/// `E± = ±√(1 − r²)` on the principal branch.
pub fn eigenvalues(r: f64) -> (C64, C64) {
    let e = C64::new(1.0 - r * r, 0.0).sqrt();
    (e, -e)
}

/// `Σ (P0_model(r, t_i) − P0_i)²`.
pub fn sse(samples: &[(f64, f64)], r: f64) -> f64 {
    samples.iter().map(|&(t, p)| (p0_unchecked(r, t) - p).powi(2)).sum()
}

/// Fits `r` by a scan over `r_range` followed by golden-section refinement.
/// A non-positive curvature at the minimum is flagged with `stderr = ∞`.
pub fn fit_r(samples: &[(f64, f64)], r_range: (f64, f64)) -> Result<FitResult> {
    let (lo, hi) = r_range;
    if samples.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 samples, got {}", samples.len())));
    }
    if !(0.0 <= lo && lo < hi && hi <= 2.0) {
        return Err(Error::InvalidParameter(format!("r range must satisfy 0 <= lo < hi <= 2, got ({lo}, {hi})")));
    }
    if samples.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    let steps = ((hi - lo) / SCAN_STEP).round() as usize;
    let node = |k: usize| if k == steps { hi } else { lo + k as f64 * SCAN_STEP };
    let (mut best_k, mut best) = (0, f64::INFINITY);
    for k in 0..=steps {
        let s = sse(samples, node(k));
        if s < best {
            best = s;
            best_k = k;
        }
    }
    let (mut a, mut b) = (node(best_k.saturating_sub(1)), node((best_k + 1).min(steps)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(samples, c), sse(samples, d));
    while b - a > REFINE_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(samples, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(samples, d);
        }
    }
    let mut r = 0.5 * (a + b);
    let mut s = sse(samples, r);
    // the scan node itself can beat the bracket interior at a range boundary
    if best < s {
        r = node(best_k);
        s = best;
    }
    let h = CURVATURE_STEP;
    let curvature = (sse(samples, r + h) - 2.0 * s + sse(samples, r - h)) / (h * h);
    let n = samples.len();
    let degenerate = !(curvature > 0.0);
    let stderr = if degenerate {
        log::warn!("{}", Error::DegenerateCurvature { curvature });
        f64::INFINITY
    } else {
        (2.0 * s / (n as f64 - 2.0).max(1.0) / curvature).sqrt()
    };
    let (e_plus, e_minus) = eigenvalues(r);
    Ok(FitResult { r_exp: r, stderr, sse: s, n_samples: n, e_plus, e_minus, curvature, degenerate })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenRow {
    pub r_nominal: f64,
    pub r_exp: f64,
    pub stderr: f64,
    pub e_plus: C64,
    pub e_minus: C64,
}

/// Bifurcation table: one row per fitted `r`.
pub fn eigen_curve(r_values: &[f64], fits: &[FitResult]) -> Result<Vec<EigenRow>> {
    if r_values.len() != fits.len() {
        return Err(Error::DimensionMismatch { expected: r_values.len(), found: fits.len() });
    }
    Ok(r_values
        .iter()
        .zip(fits)
        .map(|(&r_nominal, f)| {
            let (e_plus, e_minus) = eigenvalues(f.r_exp);
            EigenRow { r_nominal, r_exp: f.r_exp, stderr: f.stderr, e_plus, e_minus }
        })
        .collect())
}

/// CSV with header `r_nominal,r_exp,stderr,reE_plus,imE_plus`.
pub fn write_eigen_csv<W: Write>(out: W, rows: &[EigenRow]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["r_nominal", "r_exp", "stderr", "reE_plus", "imE_plus"]).map_err(csv_error)?;
    for row in rows {
        let stderr = if row.stderr.is_finite() { fmt_f64(row.stderr) } else { "inf".to_string() };
        w.write_record([fmt_f64(row.r_nominal), fmt_f64(row.r_exp), stderr, fmt_f64(row.e_plus.re), fmt_f64(row.e_plus.im)])
            .map_err(csv_error)?;
    }
    w.flush().map_err(flush_error)
}

/// Samples of the model on `t = 0, step, …, t1`.
pub fn model_samples(r: f64, t1: f64, step: f64) -> Vec<(f64, f64)> {
    let n = (t1 / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).map(|t| (t, p0_unchecked(r, t))).collect()
}
