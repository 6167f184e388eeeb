//! Photoluminescence readout: per-level rate calibration, inversion of
//! measured counts into level populations, and a Poisson shot-noise model.
//!
//! Populations and rates use the level order `|0⟩e|1⟩n, |0⟩e|0⟩n,
//! |−1⟩e|1⟩n, |−1⟩e|0⟩n`, the same index order as the system ⊗ ancilla basis.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_error, csv_writer, flush_error, fmt_f64};
use crate::numkit::C64;
use crate::simulator::CombinedState;

/// Name recorded in output metadata for the noise generator.
pub const NOISE_ALGORITHM: &str = "ChaCha8Rng stream per replicate, Poisson photon counts";

/// Largest accepted condition number of the inversion matrix.
pub const MAX_READOUT_CONDITION: f64 = 1e12;

/// Pulse sequences applied before the optical readout. Each one permutes the
/// level populations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sequence {
    /// No pulse.
    #[serde(rename = "N0")]
    Identity,
    /// Selective π pulse `|0⟩e|1⟩n ↔ |−1⟩e|1⟩n`.
    #[serde(rename = "piMW1")]
    PiMw1,
    /// Selective π pulse `|0⟩e|1⟩n ↔ |0⟩e|0⟩n`.
    #[serde(rename = "piRF1")]
    PiRf1,
    #[serde(rename = "piMW1_piRF1")]
    PiMw1PiRf1,
    /// `πMW1` followed by `πRF2` (`|−1⟩e|1⟩n ↔ |−1⟩e|0⟩n`).
    #[serde(rename = "piMW1_piRF2")]
    PiMw1PiRf2,
}

impl Sequence {
    pub const CALIBRATION: [Sequence; 5] =
        [Sequence::Identity, Sequence::PiMw1, Sequence::PiRf1, Sequence::PiMw1PiRf1, Sequence::PiMw1PiRf2];
    pub const MEASUREMENT: [Sequence; 3] = [Sequence::Identity, Sequence::PiMw1, Sequence::PiRf1];

    pub fn label(&self) -> &'static str {
        match self {
            Sequence::Identity => "N0",
            Sequence::PiMw1 => "piMW1",
            Sequence::PiRf1 => "piRF1",
            Sequence::PiMw1PiRf1 => "piMW1_piRF1",
            Sequence::PiMw1PiRf2 => "piMW1_piRF2",
        }
    }

    pub fn parse(label: &str) -> Option<Sequence> {
        Sequence::CALIBRATION.into_iter().find(|s| s.label() == label)
    }

    /// Populations after the sequence acts on `p`.
    pub fn apply(&self, p: [f64; 4]) -> [f64; 4] {
        let swap = |mut p: [f64; 4], i: usize, j: usize| {
            p.swap(i, j);
            p
        };
        match self {
            Sequence::Identity => p,
            Sequence::PiMw1 => swap(p, 0, 2),
            Sequence::PiRf1 => swap(p, 0, 1),
            Sequence::PiMw1PiRf1 => swap(swap(p, 0, 2), 0, 1),
            Sequence::PiMw1PiRf2 => swap(swap(p, 0, 2), 2, 3),
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Expected detected photons per readout for each fully populated level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PLRates(pub [f64; 4]);

impl Default for PLRates {
    /// Synthetic rates of plausible magnitude for a single NV center; they are
    /// not measured values.
    fn default() -> Self {
        PLRates([0.040, 0.031, 0.022, 0.026])
    }
}

impl PLRates {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!("PL rates must be finite and >= 0, got {:?}", self.0)));
        }
        Ok(())
    }

    /// `Σ p_i N_i`.
    pub fn expected(&self, p: [f64; 4]) -> f64 {
        p.iter().zip(self.0.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Photon counts per readout after one pulse sequence. `repetitions == 0`
/// marks an exact expectation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub sequence_id: Sequence,
    pub counts: f64,
    pub repetitions: u64,
}

pub fn write_counts_csv<W: Write>(out: W, records: &[CountRecord]) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["sequence_id", "counts", "repetitions"]).map_err(csv_error)?;
    for r in records {
        w.write_record([r.sequence_id.label().to_string(), fmt_f64(r.counts), r.repetitions.to_string()])
            .map_err(csv_error)?;
    }
    w.flush().map_err(flush_error)
}

/// Deterministic Poisson photon source; one stream per replicate.
#[derive(Clone, Debug)]
pub struct ShotNoise {
    rng: ChaCha8Rng,
}

impl ShotNoise {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Per-shot counts: a Poisson draw with mean `reps · per_shot`, divided by `reps`.
    /// `reps == 0` returns the expectation.
    pub fn sample(&mut self, per_shot: f64, reps: u64) -> f64 {
        if reps == 0 || per_shot <= 0.0 {
            return per_shot.max(0.0);
        }
        let mean = per_shot * reps as f64;
        let draw: f64 = Poisson::new(mean).expect("positive finite mean").sample(&mut self.rng);
        draw / reps as f64
    }
}

/// Counts for `sequences` applied to populations `p`.
pub fn sequence_counts(
    p: [f64; 4],
    rates: &PLRates,
    sequences: &[Sequence],
    reps: u64,
    noise: &mut ShotNoise,
) -> Vec<CountRecord> {
    sequences
        .iter()
        .map(|s| CountRecord { sequence_id: *s, counts: noise.sample(rates.expected(s.apply(p)), reps), repetitions: reps })
        .collect()
}

/// Counts of the three measurement sequences for final-state populations `p`.
pub fn simulate_counts(p: [f64; 4], rates: &PLRates, reps: u64, seed: u64) -> Result<Vec<CountRecord>> {
    check_populations(p)?;
    rates.validate()?;
    Ok(sequence_counts(p, rates, &Sequence::MEASUREMENT, reps, &mut ShotNoise::new(seed, 0)))
}

/// Noise-free counts of the three measurement sequences.
pub fn expected_counts(p: [f64; 4], rates: &PLRates) -> Vec<CountRecord> {
    sequence_counts(p, rates, &Sequence::MEASUREMENT, 0, &mut ShotNoise::new(0, 0))
}

fn check_populations(p: [f64; 4]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < -1e-12) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("populations must be >= 0 and sum to 1, got {p:?}")));
    }
    Ok(())
}

/// Populations right after optical polarization with nuclear polarization 1.
pub fn polarized_populations(p_e: f64) -> [f64; 4] {
    [p_e, 0.0, 1.0 - p_e, 0.0]
}

/// Counts of the five calibration sequences.
pub fn calibration_counts(rates: &PLRates, p_e: f64, reps: u64, noise: &mut ShotNoise) -> Vec<CountRecord> {
    sequence_counts(polarized_populations(p_e), rates, &Sequence::CALIBRATION, reps, noise)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub rates: PLRates,
    /// Euclidean norm of the least-squares residual.
    pub residual: f64,
}

fn counts_for(records: &[CountRecord], s: Sequence) -> Result<f64> {
    records
        .iter()
        .find(|r| r.sequence_id == s)
        .map(|r| r.counts)
        .ok_or_else(|| Error::InvalidParameter(format!("missing count record for sequence {s}")))
}

/// Least-squares rates from the five calibration records.
pub fn calibrate_rates(records: &[CountRecord], p_e: f64) -> Result<Calibration> {
    if !(p_e > 0.0 && p_e <= 1.0) {
        return Err(Error::InvalidParameter(format!("P_e must lie in (0, 1], got {p_e}")));
    }
    if (p_e - 0.5).abs() < 1e-6 {
        return Err(Error::RankDeficient { p_e });
    }
    let init = polarized_populations(p_e);
    let mut a = DMatrix::<f64>::zeros(5, 4);
    let mut b = DVector::<f64>::zeros(5);
    for (row, s) in Sequence::CALIBRATION.iter().enumerate() {
        for (col, v) in s.apply(init).into_iter().enumerate() {
            a[(row, col)] = v;
        }
        b[row] = counts_for(records, *s)?;
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let residual = (&a * &x - &b).norm();
    Ok(Calibration { rates: PLRates([x[0], x[1], x[2], x[3]]), residual })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Populations {
    /// Solution of the linear system before clamping.
    pub raw: [f64; 4],
    /// `raw` clamped to `[0, 1]`.
    pub values: [f64; 4],
    pub clamped: bool,
}

/// The 4x4 system mapping populations to the three measurement counts plus normalization.
pub fn readout_matrix(rates: &PLRates) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(4, 4);
    for (row, s) in Sequence::MEASUREMENT.iter().enumerate() {
        // counts = Σ_i (S p)_i N_i = Σ_j p_j N_{S(j)}
        for j in 0..4 {
            let mut unit = [0.0; 4];
            unit[j] = 1.0;
            m[(row, j)] = rates.expected(s.apply(unit));
        }
    }
    for j in 0..4 {
        m[(3, j)] = 1.0;
    }
    m
}

/// Solves for the level populations from the three measurement records.
pub fn populations_from_counts(records: &[CountRecord], rates: &PLRates) -> Result<Populations> {
    let m = readout_matrix(rates);
    let sv = m.clone().singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_READOUT_CONDITION) {
        return Err(Error::SingularReadout { condition });
    }
    let mut b = DVector::<f64>::zeros(4);
    for (row, s) in Sequence::MEASUREMENT.iter().enumerate() {
        b[row] = counts_for(records, *s)?;
    }
    b[3] = 1.0;
    let x = m.lu().solve(&b).ok_or(Error::SingularReadout { condition: f64::INFINITY })?;
    let raw = [x[0], x[1], x[2], x[3]];
    let values = raw.map(|v| v.clamp(0.0, 1.0));
    Ok(Populations { raw, values, clamped: values != raw })
}

/// Synthetic measurement of `P0`: noisy rate calibration followed by noisy
/// readout of each final state, both drawn from the replicate's stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseChain {
    pub rates: PLRates,
    pub p_e: f64,
    /// Repetitions per pulse sequence; 0 gives the noise-free expectation.
    pub repetitions: u64,
    pub seed: u64,
    /// Points whose measured selected-branch population falls below this
    /// are dropped. Off by default: the cut selects on noise and biases the
    /// mean, but it removes shot-noise-dominated points deep in the broken regime.
    pub min_branch: f64,
}

/// Default for [`NoiseChain::min_branch`].
pub const DEFAULT_MIN_BRANCH: f64 = 0.0;

impl Default for NoiseChain {
    fn default() -> Self {
        Self { rates: PLRates::default(), p_e: 0.9, repetitions: 500_000, seed: 0, min_branch: DEFAULT_MIN_BRANCH }
    }
}

impl NoiseChain {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if !(self.p_e > 0.0 && self.p_e <= 1.0) {
            return Err(Error::InvalidParameter(format!("P_e must lie in (0, 1], got {}", self.p_e)));
        }
        if !(0.0..1.0).contains(&self.min_branch) {
            return Err(Error::InvalidParameter(format!("min_branch must lie in [0, 1), got {}", self.min_branch)));
        }
        Ok(())
    }

    /// Measured `P0` for each population vector in `finals`. Points whose
    /// selected branch comes out empty or below `min_branch` are `None`.
    pub fn measure_p0(&self, finals: &[[f64; 4]], replicate: u64) -> Result<Vec<Option<f64>>> {
        self.validate()?;
        let mut noise = ShotNoise::new(self.seed, replicate);
        let cal = calibrate_rates(&calibration_counts(&self.rates, self.p_e, self.repetitions, &mut noise), self.p_e)?;
        finals
            .iter()
            .map(|p| {
                let recs = sequence_counts(*p, &self.rates, &Sequence::MEASUREMENT, self.repetitions, &mut noise);
                let values = populations_from_counts(&recs, &cal.rates)?.values;
                if values[0] + values[2] < self.min_branch {
                    return Ok(None);
                }
                match p0_from_populations(values) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::ZeroSelectionBranch { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    }
}

/// `P0 = P_{0,1} / (P_{0,1} + P_{−1,1})`.
pub fn p0_from_populations(p: [f64; 4]) -> Result<f64> {
    let denominator = p[0] + p[2];
    if denominator.abs() < 1e-12 {
        return Err(Error::ZeroSelectionBranch { denominator });
    }
    Ok(p[0] / denominator)
}

/// Level populations of a combined state after the nuclear rotation
/// `X(−π/2)`, which maps `|−⟩` to `|1⟩n` and `|+⟩` to `|0⟩n`.
pub fn level_populations(state: &CombinedState) -> [f64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // exp(iπσx/4) = (I + iσx)/√2
    let (d, o) = (C64::new(s, 0.0), C64::new(0.0, s));
    let a = state.amplitudes;
    let rotated = [d * a[0] + o * a[1], o * a[0] + d * a[1], d * a[2] + o * a[3], o * a[2] + d * a[3]];
    let total: f64 = rotated.iter().map(|z| z.norm_sqr()).sum();
    rotated.map(|z| z.norm_sqr() / total)
}
