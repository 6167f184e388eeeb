//! NV-center realization of the dilated Hamiltonian: the static two-qubit
//! Hamiltonian, the two selective microwave drives, and checks of the
//! rotating-frame reduction.
//!
//! Frequencies are in MHz, times in μs, and Hamiltonians in rad/μs, so a
//! transition at `f` MHz has angular frequency `2π f`. Level order is
//! `|0⟩e|1⟩n, |0⟩e|0⟩n, |−1⟩e|1⟩n, |−1⟩e|0⟩n`, which is the system ⊗ ancilla
//! order with `|0⟩e → |0⟩` and `|1⟩n → |0⟩`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_error, csv_writer, flush_error, fmt_f64};
use crate::numkit::{expm, pauli, CVector, ComplexMatrix, TimeGrid, C64};
use crate::pauli::{assemble, ASeries, PauliCoeffs};
use crate::simulator::{postselect, CombinedState, Trajectory};

/// Largest carrier phase advance per step, in cycles, accepted by the lab-frame audit.
pub const MAX_CYCLES_PER_STEP: f64 = 0.02;

/// NV-center constants. Frequencies in MHz, field in gauss, gyromagnetic
/// ratios as `γ/2π` in MHz/G.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NVParams {
    pub d: f64,
    pub q: f64,
    pub a_hf: f64,
    pub b0: f64,
    pub gamma_e: f64,
    pub gamma_n: f64,
}

impl Default for NVParams {
    fn default() -> Self {
        Self { d: 2870.0, q: -4.95, a_hf: -2.16, b0: 506.0, gamma_e: -2.8025, gamma_n: 0.3077e-3 }
    }
}

impl NVParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.d, self.q, self.a_hf, self.b0, self.gamma_e, self.gamma_n];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("NV parameters must be finite".into()));
        }
        if self.d <= 0.0 || self.b0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "D and B0 must be > 0, got D = {} and B0 = {}",
                self.d, self.b0
            )));
        }
        Ok(())
    }

    /// Electron Zeeman frequency `−γe B0 / 2π` (MHz).
    pub fn omega_e(&self) -> f64 {
        -self.gamma_e * self.b0
    }

    /// Nuclear Zeeman frequency `−γn B0 / 2π` (MHz).
    pub fn omega_n(&self) -> f64 {
        -self.gamma_n * self.b0
    }

    /// Nuclear transition frequencies (MHz) with the electron in `|0⟩` and in `|−1⟩`.
    pub fn nuclear_splittings(&self) -> (f64, f64) {
        let base = self.q + self.omega_n();
        (base, base - self.a_hf)
    }
}

/// Angular frequencies (rad/μs) of the electron transitions with the nucleus
/// in `|1⟩n` (`mw1`) and in `|0⟩n` (`mw2`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Carriers {
    pub mw1: f64,
    pub mw2: f64,
}

impl Carriers {
    /// Largest carrier frequency in MHz.
    pub fn max_frequency(&self) -> f64 {
        self.mw1.abs().max(self.mw2.abs()) / TAU
    }
}

/// `H₀ = π[−(D−ωe−A/2) σz⊗I + (Q+ωn−A/2) I⊗σz + (A/2) σz⊗σz]` and its carriers.
pub fn subspace_h0(p: &NVParams) -> (ComplexMatrix, Carriers) {
    let (we, wn, a) = (p.omega_e(), p.omega_n(), p.a_hf);
    let coeffs = {
        let mut c = PauliCoeffs::default();
        c.c[3][0] = -PI * (p.d - we - a / 2.0);
        c.c[0][3] = PI * (p.q + wn - a / 2.0);
        c.c[3][3] = PI * a / 2.0;
        c
    };
    let h0 = assemble(&coeffs);
    let e = |k: usize| h0[(k, k)].re;
    // |−1⟩e minus |0⟩e at fixed nuclear state
    let carriers = Carriers { mw1: e(2) - e(0), mw2: e(3) - e(1) };
    (h0, carriers)
}

/// Drive parameters on the A-series grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseProgram {
    pub grid: TimeGrid,
    /// `Ω(t)` in MHz.
    pub omega_rabi: Vec<f64>,
    /// `φ(t)` in rad, unwrapped.
    pub phase: Vec<f64>,
    /// Instantaneous angular frequency of drive 1, `ω_MW1 + 2 A4(t)`.
    pub freq1: Vec<f64>,
    /// Instantaneous angular frequency of drive 2, `ω_MW2 − 2 A4(t)`.
    pub freq2: Vec<f64>,
    pub carriers: Carriers,
    /// `A2(t)`, which defines the rotating frame rather than a drive.
    pub frame_a2: Vec<f64>,
}

/// Metadata written next to a pulse CSV.
#[derive(Clone, Debug, Serialize)]
pub struct PulseHeader {
    pub carriers: Carriers,
    pub nv: NVParams,
}

impl PulseProgram {
    pub fn freq1_offset(&self, k: usize) -> f64 {
        self.freq1[k] - self.carriers.mw1
    }

    pub fn freq2_offset(&self, k: usize) -> f64 {
        self.freq2[k] - self.carriers.mw2
    }

    /// `A4(t_k)` recovered from the drive detuning.
    pub fn a4(&self, k: usize) -> f64 {
        0.5 * self.freq1_offset(k)
    }

    /// `H_rot(t_k) = A2 I⊗σz + A4 σz⊗σz + πΩ cosφ σx⊗I + πΩ sinφ σy⊗σz`.
    pub fn rotating_hamiltonian(&self, k: usize) -> ComplexMatrix {
        let amp = PI * self.omega_rabi[k];
        let (s, c) = self.phase[k].sin_cos();
        assemble(&PauliCoeffs::from_a([amp * c, self.frame_a2[k], amp * s, self.a4(k)]))
    }

    /// CSV with header `t,omega_rabi,phase,freq1_offset,freq2_offset`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["t", "omega_rabi", "phase", "freq1_offset", "freq2_offset"]).map_err(csv_error)?;
        for (k, t) in self.grid.times().enumerate() {
            w.write_record([
                fmt_f64(t),
                fmt_f64(self.omega_rabi[k]),
                fmt_f64(self.phase[k]),
                fmt_f64(self.freq1_offset(k)),
                fmt_f64(self.freq2_offset(k)),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(flush_error)
    }

    /// Linear interpolation of `(Ω, φ, A2, A4)` at `t`.
    fn sample(&self, t: f64) -> [f64; 4] {
        let n = self.grid.n_nodes();
        let x = ((t - self.grid.t0()) / self.grid.dt()).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let w = x - k as f64;
        let lerp = |v: &[f64]| v[k] * (1.0 - w) + v[k + 1] * w;
        [lerp(&self.omega_rabi), lerp(&self.phase), lerp(&self.frame_a2), 0.5 * (lerp(&self.freq1) - self.carriers.mw1)]
    }
}

/// Maps an A-series to drive amplitudes, phases and frequencies.
pub fn synthesize(a: &ASeries, carriers: Carriers) -> PulseProgram {
    let n = a.len();
    let mut omega_rabi = Vec::with_capacity(n);
    let mut phase: Vec<f64> = Vec::with_capacity(n);
    let mut freq1 = Vec::with_capacity(n);
    let mut freq2 = Vec::with_capacity(n);
    for k in 0..n {
        let [a1, _, a3, a4] = a.a_at(k);
        omega_rabi.push(a1.hypot(a3) / PI);
        let raw = a3.atan2(a1);
        let value = match phase.last() {
            Some(&prev) => raw + TAU * ((prev - raw) / TAU).round(),
            None => raw,
        };
        phase.push(value);
        freq1.push(carriers.mw1 + 2.0 * a4);
        freq2.push(carriers.mw2 - 2.0 * a4);
    }
    PulseProgram { grid: a.grid, omega_rabi, phase, freq1, freq2, carriers, frame_a2: a.a[1].clone() }
}

/// Largest node-wise spectral-norm distance between the reconstructed
/// rotating-frame Hamiltonian and the A-form of `a`.
pub fn rotating_frame_check(prog: &PulseProgram, a: &ASeries) -> f64 {
    (0..a.len())
        .map(|k| {
            let target = assemble(&PauliCoeffs::from_a(a.a_at(k)));
            (prog.rotating_hamiltonian(k) - target).opnorm()
        })
        .fold(0.0, f64::max)
}

/// Integrates the lab-frame Hamiltonian with cosine drives (no rotating-wave
/// approximation) and maps each state back to the rotating frame before
/// post-selection.
pub fn simulate_lab_frame(
    prog: &PulseProgram,
    p: &NVParams,
    grid_fine: &TimeGrid,
    initial: &CombinedState,
) -> Result<Trajectory> {
    p.validate()?;
    let (h0, carriers) = subspace_h0(p);
    let cycles_per_step = grid_fine.dt() * carriers.max_frequency();
    if cycles_per_step > MAX_CYCLES_PER_STEP {
        return Err(Error::GridTooCoarse { cycles_per_step });
    }
    if grid_fine.t0() < prog.grid.t0() - 1e-12 || grid_fine.t1() > prog.grid.t1() + 1e-12 {
        return Err(Error::InvalidParameter("fine grid extends beyond the pulse program".into()));
    }
    let sx = pauli(1);
    let ancilla0 = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
    let ancilla1 = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
    let drive1 = sx.kron(&ancilla0);
    let drive2 = sx.kron(&ancilla1);
    let iz = pauli(0).kron(&pauli(3));
    let zz = pauli(3).kron(&pauli(3));

    // running integrals of A2 and A4 from the program start, by the midpoint rule
    let mut int_a2 = 0.0;
    let mut int_a4 = 0.0;
    let t_start = prog.grid.t0();
    let advance = |t_from: f64, t_to: f64, int_a2: &mut f64, int_a4: &mut f64| {
        let s = prog.sample(0.5 * (t_from + t_to));
        *int_a2 += s[2] * (t_to - t_from);
        *int_a4 += s[3] * (t_to - t_from);
    };
    // bring the integrals up to the fine-grid start with a few coarse steps
    let lead = grid_fine.t0() - t_start;
    if lead > 0.0 {
        let pieces = (lead / prog.grid.dt()).ceil().max(1.0) as usize * 8;
        let at = |j: usize| t_start + lead * j as f64 / pieces as f64;
        for j in 0..pieces {
            advance(at(j), at(j + 1), &mut int_a2, &mut int_a4);
        }
    }

    let frame = |t: f64, ia2: f64, ia4: f64| -> ComplexMatrix {
        // U_rot = exp(i[H0 (t − t0) − ∫A2 I⊗σz − ∫A4 σz⊗σz])
        let k = h0.scale(t - prog.grid.t0()) - iz.scale(ia2) - zz.scale(ia4);
        ComplexMatrix::from_fn(4, |i, j| if i == j { C64::from_polar(1.0, k[(i, i)].re) } else { C64::new(0.0, 0.0) })
    };
    let lab_hamiltonian = |t: f64, ia4: f64| -> ComplexMatrix {
        let [omega, phi, _, _] = prog.sample(t);
        let tau = t - prog.grid.t0();
        let theta1 = carriers.mw1 * tau + 2.0 * ia4;
        let theta2 = carriers.mw2 * tau - 2.0 * ia4;
        let amp = TAU * omega;
        &h0 + drive1.scale(amp * (theta1 - phi).cos()) + drive2.scale(amp * (theta2 + phi).cos())
    };

    // the initial state is given in the rotating frame
    let u0 = frame(grid_fine.t0(), int_a2, int_a4);
    let mut psi: CVector = u0.adjoint().mul_vec(&CVector::from_column_slice(&initial.amplitudes));
    let mut states = Vec::with_capacity(grid_fine.n_nodes());
    states.push(initial.clone());
    for k in 0..grid_fine.n_steps() {
        let (ta, tb) = (grid_fine.time(k), grid_fine.time(k + 1));
        let tm = 0.5 * (ta + tb);
        let (mut half_a2, mut half_a4) = (int_a2, int_a4);
        advance(ta, tm, &mut half_a2, &mut half_a4);
        let h = lab_hamiltonian(tm, half_a4);
        psi = expm(&(h * C64::new(0.0, -(tb - ta)))).mul_vec(&psi);
        advance(ta, tb, &mut int_a2, &mut int_a4);
        let rot = frame(tb, int_a2, int_a4).mul_vec(&psi);
        states.push(CombinedState::new([rot[0], rot[1], rot[2], rot[3]]));
    }
    let mut p0 = Vec::with_capacity(states.len());
    let mut success_prob = Vec::with_capacity(states.len());
    for s in &states {
        let (cond, success) = postselect(s)?;
        p0.push(cond[0].norm_sqr());
        success_prob.push(success);
    }
    Ok(Trajectory { grid: *grid_fine, states, p0, success_prob })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::{dilate, DilationConfig};
    use crate::pauli::extract_a_series;
    use crate::ptmodel::pt_hamiltonian_unchecked;
    use crate::simulator::{evolve_dilated, prepare_initial};

    fn series_from(grid: TimeGrid, f: impl Fn(f64) -> [f64; 4]) -> ASeries {
        let mut a: [Vec<f64>; 4] = Default::default();
        for t in grid.times() {
            for (s, v) in a.iter_mut().zip(f(t)) {
                s.push(v);
            }
        }
        let n = grid.n_nodes();
        ASeries { grid, a, b: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]], other_max: 0.0 }
    }

    fn pt_series(r: f64, t1: f64, n: usize) -> ASeries {
        let grid = TimeGrid::new(0.0, t1, n).unwrap();
        let h = pt_hamiltonian_unchecked(r);
        let res = dilate(&|_| h.clone(), &DilationConfig::with_grid(grid)).unwrap();
        extract_a_series(&res.hsa).unwrap()
    }

    #[test]
    fn zeeman_frequencies() {
        let p = NVParams::default();
        assert!((p.omega_e() - 1418.065).abs() < 1e-9);
        assert!((p.omega_n() + 0.1556962).abs() < 1e-6);
        assert!(p.validate().is_ok());
        assert!(NVParams { b0: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn carriers_degenerate_without_hyperfine() {
        let p = NVParams { a_hf: 0.0, q: 0.0, gamma_n: 0.0, ..NVParams::default() };
        let (_, c) = subspace_h0(&p);
        assert!((c.mw1 - c.mw2).abs() < 1e-9);
    }

    #[test]
    fn carriers_split_by_hyperfine() {
        let p = NVParams::default();
        let (h0, c) = subspace_h0(&p);
        assert!(((c.mw1 - c.mw2) - TAU * 2.16).abs() < 1e-9);
        assert!((c.mw2 - TAU * (p.d - p.omega_e())).abs() < 1e-9);
        assert!(h0.is_hermitian(0.0));
    }

    #[test]
    fn nuclear_splittings_match_rf_lines() {
        // RF pulses at 2.9 MHz and 5.1 MHz drive the nuclear transitions
        let (in_zero, in_minus) = NVParams::default().nuclear_splittings();
        assert!((in_zero.abs() - 5.1).abs() < 0.05, "{in_zero}");
        assert!((in_minus.abs() - 2.9).abs() < 0.05, "{in_minus}");
        // and agree with the level differences of H0
        let (h0, _) = subspace_h0(&NVParams::default());
        let e = |k: usize| h0[(k, k)].re;
        assert!(((e(0) - e(1)) - TAU * in_zero).abs() < 1e-9);
        assert!(((e(2) - e(3)) - TAU * in_minus).abs() < 1e-9);
    }

    #[test]
    fn synthesis_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let carriers = Carriers { mw1: 10.0, mw2: 20.0 };
        let cases = [([1.0, 0.0, 0.0, 0.0], 0.0), ([0.0, 0.0, 1.0, 0.0], PI / 2.0), ([-1.0, 0.0, 0.0, 0.0], PI)];
        for (a, phi) in cases {
            let prog = synthesize(&series_from(grid, |_| a), carriers);
            assert!((prog.omega_rabi[0] - 1.0 / PI).abs() < 1e-15);
            assert!((prog.phase[0] - phi).abs() < 1e-15);
        }
    }

    #[test]
    fn frequency_offsets_follow_a4() {
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let a = series_from(grid, |t| [1.0, 0.2, 0.1, 0.3 * t]);
        let prog = synthesize(&a, Carriers { mw1: 100.0, mw2: 90.0 });
        for k in 0..a.len() {
            assert!((prog.freq1_offset(k) - 2.0 * a.a[3][k]).abs() < 1e-12);
            assert!((prog.freq2_offset(k) + 2.0 * a.a[3][k]).abs() < 1e-12);
            assert!((prog.freq1_offset(k) + prog.freq2_offset(k)).abs() < 1e-12);
        }
        assert!(rotating_frame_check(&prog, &a) <= 1e-12);
    }

    #[test]
    fn phase_unwraps_across_branch_cut() {
        // A rotates through φ = π
        let grid = TimeGrid::new(0.0, 1.0, 101).unwrap();
        let a = series_from(grid, |t| {
            let phi = 2.5 + 1.5 * t;
            [phi.cos(), 0.0, phi.sin(), 0.0]
        });
        let prog = synthesize(&a, Carriers { mw1: 1.0, mw2: 1.0 });
        for w in prog.phase.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.1);
        }
        assert!((prog.phase.last().unwrap() - 4.0).abs() < 1e-12);
        assert!(rotating_frame_check(&prog, &a) <= 1e-12);
    }

    #[test]
    fn branch_flip_is_detected() {
        let a = pt_series(0.6, 2.0, 201);
        let mut prog = synthesize(&a, Carriers { mw1: 1.0, mw2: 2.0 });
        assert!(rotating_frame_check(&prog, &a) <= 1e-9);
        let k = 77;
        prog.phase[k] += PI;
        let expected = 2.0 * a.a[0][k].hypot(a.a[2][k]);
        let residual = rotating_frame_check(&prog, &a);
        assert!((residual - expected).abs() <= 1e-9 * expected.max(1.0), "{residual} vs {expected}");
    }

    #[test]
    fn roundtrip_on_pt_family() {
        for &r in &[0.6, 1.0, 1.4] {
            let a = pt_series(r, 8.0, 8001);
            let prog = synthesize(&a, subspace_h0(&NVParams::default()).1);
            assert!(rotating_frame_check(&prog, &a) <= 1e-9, "r = {r}");
            assert!(prog.omega_rabi.iter().all(|v| *v >= 0.0));
            for w in prog.phase.windows(2) {
                assert!((w[1] - w[0]).abs() < PI);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let prog = synthesize(&series_from(grid, |_| [1.0, 0.0, 0.0, 0.5]), Carriers { mw1: 3.0, mw2: 4.0 });
        let mut buf = Vec::new();
        prog.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,omega_rabi,phase,freq1_offset,freq2_offset");
        assert_eq!(lines[1], format!("0,{},0,1,-1", 1.0 / PI));
    }

    fn low_carrier() -> NVParams {
        // a 20-30 MHz electron transition keeps the audit cheap and the RWA error visible
        NVParams { d: 1440.0, ..NVParams::default() }
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let prog = synthesize(&series_from(grid, |_| [1.0, 0.0, 0.0, 0.0]), Carriers { mw1: 1.0, mw2: 1.0 });
        let init = prepare_initial([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.0).unwrap();
        let err = simulate_lab_frame(&prog, &NVParams::default(), &grid, &init).unwrap_err();
        assert_eq!(err.name(), "GridTooCoarse");
    }

    #[test]
    fn lab_frame_without_drive_is_static() {
        let p = low_carrier();
        let (_, carriers) = subspace_h0(&p);
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let prog = synthesize(&series_from(grid, |_| [0.0, 0.0, 0.0, 0.0]), carriers);
        let fine = TimeGrid::with_step(0.0, 1.0, 1e-4).unwrap();
        let init = prepare_initial([C64::new(0.6, 0.0), C64::new(0.0, 0.8)], 0.5).unwrap();
        let traj = simulate_lab_frame(&prog, &p, &fine, &init).unwrap();
        for v in &traj.p0 {
            assert!((v - 0.36).abs() < 1e-9);
        }
    }

    fn rwa_deviation(p: &NVParams, a1: f64, t1: f64) -> f64 {
        let (_, carriers) = subspace_h0(p);
        let grid = TimeGrid::new(0.0, t1, 101).unwrap();
        let a = series_from(grid, |_| [a1, 0.0, 0.0, 0.0]);
        let prog = synthesize(&a, carriers);
        let fine = TimeGrid::with_step(0.0, t1, 2e-4).unwrap();
        let init = prepare_initial([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.0).unwrap();
        let lab = simulate_lab_frame(&prog, p, &fine, &init).unwrap();
        fine.times()
            .zip(&lab.p0)
            .map(|(t, v)| (v - (a1 * t).cos().powi(2)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rwa_error_scales_with_rabi_amplitude() {
        let p = low_carrier();
        // same rotation angle, twice the drive strength
        let single = rwa_deviation(&p, 1.0, 1.5);
        let double = rwa_deviation(&p, 2.0, 0.75);
        let ratio = double / single;
        assert!(single < 0.05 && double < 0.1);
        assert!((1.5..=2.7).contains(&ratio), "single {single:e}, double {double:e}, ratio {ratio}");
    }

    #[test]
    fn lab_frame_agrees_with_rotating_frame() {
        let p = low_carrier();
        let grid = TimeGrid::new(0.0, 2.0, 2001).unwrap();
        let h = pt_hamiltonian_unchecked(0.6);
        let res = dilate(&|_| h.clone(), &DilationConfig::with_grid(grid)).unwrap();
        let a = extract_a_series(&res.hsa).unwrap();
        let prog = synthesize(&a, subspace_h0(&p).1);
        let init = prepare_initial([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], res.eta0()).unwrap();
        let rot = evolve_dilated(&res.hsa, &init, 1).unwrap();
        let fine = TimeGrid::with_step(0.0, 2.0, 2e-4).unwrap();
        let lab = simulate_lab_frame(&prog, &p, &fine, &init).unwrap();
        for &t in &[1.0, 2.0] {
            let dev = (lab.p0[fine.nearest_index(t)] - rot.p0[grid.nearest_index(t)]).abs();
            assert!(dev <= 0.02, "t = {t}: {dev}");
        }
    }
}
