//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use num_complex::Complex64 as C;

/// `exp(−iHt)|0⟩` for `H = [[ir, 1], [1, −ir]]` from `exp(−iHt) = cos(Et) I − i sin(Et)/E H`,
/// with `E = √(1 − r²)` taken complex so one formula covers every regime.
pub fn brute_state(r: f64, t: f64) -> [C; 2] {
    let e = C::new(1.0 - r * r, 0.0).sqrt();
    let et = e * t;
    let (cos, sinc) = if e.norm() * t.abs() < 1e-6 {
        // series keeps the exceptional point and small times exact
        let x2 = et * et;
        (C::new(1.0, 0.0) - x2 / 2.0, C::new(t, 0.0) * (C::new(1.0, 0.0) - x2 / 6.0))
    } else {
        (et.cos(), et.sin() / e)
    };
    let i = C::new(0.0, 1.0);
    // first column of H is (ir, 1)
    [cos - i * sinc * (i * r), -i * sinc]
}

/// Normalized `|0⟩` population of [`brute_state`].
pub fn brute_p0(r: f64, t: f64) -> f64 {
    let [a, b] = brute_state(r, t);
    a.norm_sqr() / (a.norm_sqr() + b.norm_sqr())
}

/// Exceptional-point form `(1 + t)² / ((1 + t)² + t²)`.
pub fn ep_p0(t: f64) -> f64 {
    (1.0 + t).powi(2) / ((1.0 + t).powi(2) + t * t)
}

/// Maximum of `|a_k − f(t_k)|`.
pub fn max_error(times: impl Iterator<Item = f64>, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    times.zip(values).map(|(t, v)| (v - f(t)).abs()).fold(0.0, f64::max)
}

/// Interior local maxima, refined by a parabola through the three nodes.
pub fn peak_times(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut peaks = Vec::new();
    for k in 1..values.len() - 1 {
        let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
        if b > a && b >= c {
            let h = times[k + 1] - times[k];
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            peaks.push(times[k] + shift * h);
        }
    }
    peaks
}

/// Sample mean and standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
