//! The two-level PT-symmetric family `H(r) = [[i r, 1], [1, -i r]]` and its
//! closed-form evolution from `|0⟩`.

use std::fmt;

use crate::error::{Error, Result};
use crate::numkit::{ComplexMatrix, C64, ONE};

/// Half-width of the window around `r = 1` where the polynomial limit is used.
pub const EXCEPTIONAL_WINDOW: f64 = 1e-9;

/// Non-Hermiticity strength `r >= 0`; the coupling is fixed to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PTParams {
    r: f64,
}

impl PTParams {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "non-Hermiticity r must be finite and >= 0, got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PTRegime {
    Hermitian,
    Unbroken,
    ExceptionalPoint,
    Broken,
}

impl fmt::Display for PTRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PTRegime::Hermitian => "hermitian",
            PTRegime::Unbroken => "unbroken",
            PTRegime::ExceptionalPoint => "exceptional-point",
            PTRegime::Broken => "broken",
        };
        f.write_str(s)
    }
}

pub fn pt_hamiltonian(p: PTParams) -> ComplexMatrix {
    pt_hamiltonian_unchecked(p.r)
}

/// `H(r)` for any real `r`, including negative values.
pub fn pt_hamiltonian_unchecked(r: f64) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(&[C64::new(0.0, r), ONE, ONE, C64::new(0.0, -r)])
}

/// `E± = ±√(1 - r²)` on the principal branch.
pub fn pt_eigenvalues(p: PTParams) -> (C64, C64) {
    let e = C64::new(1.0 - p.r * p.r, 0.0).sqrt();
    (e, -e)
}

pub fn classify(p: PTParams) -> PTRegime {
    if p.r == 0.0 {
        PTRegime::Hermitian
    } else if p.r < 1.0 {
        PTRegime::Unbroken
    } else if p.r == 1.0 {
        PTRegime::ExceptionalPoint
    } else {
        PTRegime::Broken
    }
}

/// Unnormalized `e^{-iHt}|0⟩`. In the broken regime both components are
/// divided by `e^{t√(r²-1)}` so large times never overflow.
pub fn analytic_state(p: PTParams, t: f64) -> [C64; 2] {
    analytic_state_unchecked(p.r, t)
}

pub fn analytic_state_unchecked(r: f64, t: f64) -> [C64; 2] {
    let (up, down) = state_components(r, t);
    [C64::new(up, 0.0), C64::new(0.0, -down)]
}

/// Returns `(a, b)` with `ψ = (a, -i b)`, both real.
fn state_components(r: f64, t: f64) -> (f64, f64) {
    let disc = r * r - 1.0;
    if (r.abs() - 1.0).abs() < EXCEPTIONAL_WINDOW {
        // nilpotent limit: U = I - i t H
        (1.0 + r.signum() * t, t)
    } else if disc < 0.0 {
        let e = (-disc).sqrt();
        let (s, c) = (e * t).sin_cos();
        (c + r * s / e, s / e)
    } else {
        let s = disc.sqrt();
        // cosh and sinh divided by e^{st}
        let decay = (-2.0 * s * t).exp();
        let ch = 0.5 * (1.0 + decay);
        let sh = 0.5 * (1.0 - decay);
        (ch + r * sh / s, sh / s)
    }
}

/// Normalized population of `|0⟩` after evolving `|0⟩` for time `t`.
pub fn analytic_p0(p: PTParams, t: f64) -> f64 {
    p0_unchecked(p.r, t)
}

/// [`analytic_p0`] without the `r >= 0` guard; the fitting code evaluates the
/// model on both sides of its search interval.
pub fn p0_unchecked(r: f64, t: f64) -> f64 {
    let (a, b) = state_components(r, t);
    let num = a * a;
    let den = num + b * b;
    if den == 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// `lim_{t→∞} P0` in the broken regime: `(r+s)²/((r+s)²+1)`, `s = √(r²-1)`.
pub fn broken_asymptote(p: PTParams) -> Option<f64> {
    if p.r <= 1.0 {
        return None;
    }
    let q = p.r + (p.r * p.r - 1.0).sqrt();
    Some(q * q / (q * q + 1.0))
}

/// Oscillation period `π/√(1-r²)` of `P0` in the unbroken regime.
pub fn unbroken_period(p: PTParams) -> Option<f64> {
    if p.r >= 1.0 {
        return None;
    }
    Some(std::f64::consts::PI / (1.0 - p.r * p.r).sqrt())
}
