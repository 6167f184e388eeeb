//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_p0, ep_p0, max_error, mean_std, peak_times};
use ptdilation::dilation::{dilate, verify_dilation, DilationConfig, Thresholds};
use ptdilation::fitkit::{eigen_curve, fit_r, NOMINAL_R};
use ptdilation::numkit::{TimeGrid, C64};
use ptdilation::pauli::extract_a_series;
use ptdilation::ptmodel::pt_hamiltonian_unchecked;
use ptdilation::pulse::{rotating_frame_check, simulate_lab_frame, subspace_h0, synthesize, NVParams};
use ptdilation::readout::{
    calibrate_rates, calibration_counts, level_populations, populations_from_counts, sequence_counts, NoiseChain,
    PLRates, Sequence, ShotNoise,
};
use ptdilation::simulator::{evolve_dilated, prepare_initial, simulate_pt, Trajectory};

const T_END: f64 = 8.0;
const NODES: usize = 8001;
const ORACLE_TOL: f64 = 1e-4;
const RUNTIME_1: Duration = Duration::from_secs(5);
const RUNTIME_8: Duration = Duration::from_secs(60);
const PERIOD_TOL: f64 = 0.01;
const ASYMPTOTE_R14: f64 = 0.84992;
const ASYMPTOTE_TOL: f64 = 1e-3;
const RATIO_BAND: (f64, f64) = (3.5, 4.5);
const ROUNDOFF_FLOOR: f64 = 1e-12;
const STRUCTURAL_TOL: f64 = 1e-9;
const ROUNDTRIP_TOL: f64 = 1e-9;
const FIT_TOL: f64 = 1e-3;
const BIFURCATION_TOL: f64 = 2e-3;
const REPLICATES: u64 = 200;
/// Fitting error reported for the measured r = 0.6 curve.
const MEASURED_DELTA_R06: f64 = 0.006;
const INVERSION_TOL: f64 = 1e-12;
const RWA_TOL: f64 = 0.02;

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(0.0, T_END, n).unwrap()
}

fn run(r: f64, n: usize) -> Trajectory {
    simulate_pt(r, &DilationConfig::with_grid(grid(n))).unwrap().1
}

fn oracle_error(r: f64, n: usize) -> f64 {
    let traj = run(r, n);
    max_error(traj.grid.times(), &traj.p0, |t| brute_p0(r, t))
}

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn c1() -> Outcome {
    let start = Instant::now();
    let traj = run(0.0, NODES);
    let elapsed = start.elapsed();
    let err = max_error(traj.grid.times(), &traj.p0, |t| t.cos().powi(2));
    (err <= ORACLE_TOL && elapsed < RUNTIME_1, format!("max |P0 - cos^2 t| = {err:.2e}, runtime {elapsed:.2?}"))
}

fn c2() -> Outcome {
    let traj = run(1.0, NODES);
    let err = max_error(traj.grid.times(), &traj.p0, ep_p0);
    (err <= ORACLE_TOL, format!("max |P0 - EP form| = {err:.2e}"))
}

fn c3() -> Outcome {
    let traj = run(0.6, NODES);
    let err = max_error(traj.grid.times(), &traj.p0, |t| brute_p0(0.6, t));
    let times: Vec<f64> = traj.grid.times().collect();
    let peaks = peak_times(&times, &traj.p0);
    let period = if peaks.len() >= 2 { (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64 } else { f64::NAN };
    let dev = (period - PI / 0.8).abs();
    (err <= ORACLE_TOL && dev <= PERIOD_TOL, format!("max error {err:.2e}, period {period:.5} from {} peaks", peaks.len()))
}

fn c4() -> Outcome {
    let traj = run(1.4, NODES);
    let last = *traj.p0.last().unwrap();
    let oracle_end = brute_p0(1.4, T_END);
    let start = traj.grid.nearest_index(2.0);
    let tail = &traj.p0[start..];
    // monotone in one direction after t = 2, up to roundoff
    let rising = tail.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let falling = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let ok = (last - ASYMPTOTE_R14).abs() <= ASYMPTOTE_TOL && (oracle_end - ASYMPTOTE_R14).abs() <= ASYMPTOTE_TOL && (rising || falling);
    (ok, format!("P0(8) = {last:.6} (oracle {oracle_end:.6}), monotone after t = 2: {}", rising || falling))
}

fn c5() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    // the r = 0 dilation is exact on any grid, so its error sits at the roundoff floor
    let (e0, e0_fine) = (oracle_error(0.0, NODES), oracle_error(0.0, 2 * NODES - 1));
    ok &= e0 <= ROUNDOFF_FLOOR && e0_fine <= ROUNDOFF_FLOOR;
    parts.push(format!("r=0 errors {e0:.1e}/{e0_fine:.1e} (roundoff)"));
    for r in [0.6, 1.0, 1.4] {
        let ratio = oracle_error(r, NODES) / oracle_error(r, 2 * NODES - 1);
        ok &= (RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio);
        parts.push(format!("r={r} ratio {ratio:.3}"));
    }
    (ok, parts.join(", "))
}

fn c6() -> Outcome {
    let limits = Thresholds::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [0.0, 0.6, 1.0, 1.4] {
        let h = pt_hamiltonian_unchecked(r);
        let cfg = DilationConfig::with_grid(grid(NODES));
        let res = dilate(&|_| h.clone(), &cfg).unwrap();
        let rep = verify_dilation(&res, &|_| h.clone());
        let b = extract_a_series(&res.hsa).unwrap().b_max();
        let pass = rep.hsa_hermiticity <= limits.hsa_hermiticity
            && rep.block_antisymmetry <= STRUCTURAL_TOL
            && rep.min_metric_excess >= 0.99 * cfg.margin
            && b <= STRUCTURAL_TOL;
        ok &= pass;
        parts.push(format!(
            "r={r}: herm {:.1e} block {:.1e} excess {:.3} B {b:.1e}",
            rep.hsa_hermiticity, rep.block_antisymmetry, rep.min_metric_excess
        ));
    }
    (ok, parts.join("; "))
}

fn c7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let (_, carriers) = subspace_h0(&NVParams::default());
    for r in [0.6, 1.0, 1.4] {
        let h = pt_hamiltonian_unchecked(r);
        let res = dilate(&|_| h.clone(), &DilationConfig::with_grid(grid(NODES))).unwrap();
        let a = extract_a_series(&res.hsa).unwrap();
        let prog = synthesize(&a, carriers);
        let residual = rotating_frame_check(&prog, &a);
        // move φ to the other atan2 branch at the node with the strongest drive
        let amp = |k: usize| a.a_at(k)[0].hypot(a.a_at(k)[2]);
        let k = (0..a.len()).max_by(|&i, &j| amp(i).total_cmp(&amp(j))).unwrap();
        let mut mutated = prog.clone();
        mutated.phase[k] += PI;
        let jump = rotating_frame_check(&mutated, &a);
        let expected = 2.0 * amp(k);
        let detected = (jump - expected).abs() <= ROUNDTRIP_TOL + 1e-12 * expected;
        ok &= residual <= ROUNDTRIP_TOL && detected;
        parts.push(format!("r={r}: residual {residual:.1e}, mutation {jump:.6} vs {expected:.6}"));
    }
    (ok, parts.join("; "))
}

fn samples_of(traj: &Trajectory, step: f64) -> Vec<(f64, f64)> {
    let n = (T_END / step).round() as usize;
    (0..=n)
        .map(|j| traj.grid.nearest_index(j as f64 * step))
        .map(|k| (traj.grid.time(k), traj.p0[k]))
        .collect()
}

fn c8() -> Outcome {
    let start = Instant::now();
    let mut fits = Vec::new();
    let mut worst = 0.0f64;
    for r in NOMINAL_R {
        let fit = fit_r(&samples_of(&run(r, NODES), 0.1), (0.0, 2.0)).unwrap();
        worst = worst.max((fit.r_exp - r).abs());
        fits.push(fit);
    }
    let rows = eigen_curve(&NOMINAL_R, &fits).unwrap();
    let mut shape = 0.0f64;
    for row in &rows {
        if row.r_nominal <= 1.0 {
            shape = shape.max(row.e_plus.im.abs());
        }
        if row.r_nominal >= 1.0 {
            shape = shape.max(row.e_plus.re.abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= FIT_TOL && shape <= BIFURCATION_TOL && elapsed < RUNTIME_8;
    (ok, format!("max |r_fit - r| = {worst:.1e}, bifurcation deviation {shape:.1e}, runtime {elapsed:.2?}"))
}

fn c9() -> Outcome {
    let traj = run(0.6, NODES);
    let picks: Vec<usize> = (0..=80).map(|j| traj.grid.nearest_index(j as f64 * 0.1)).collect();
    let finals: Vec<[f64; 4]> = picks.iter().map(|&k| level_populations(&traj.states[k])).collect();
    let chain = NoiseChain { repetitions: 500_000, seed: 2024, ..NoiseChain::default() };
    let fitted: Vec<f64> = (0..REPLICATES)
        .map(|rep| {
            let measured = chain.measure_p0(&finals, rep).unwrap();
            let samples: Vec<(f64, f64)> =
                picks.iter().zip(&measured).filter_map(|(&k, m)| m.map(|p| (traj.grid.time(k), p))).collect();
            fit_r(&samples, (0.0, 2.0)).unwrap().r_exp
        })
        .collect();
    let (mean, std) = mean_std(&fitted);
    let se = std / (REPLICATES as f64).sqrt();
    let ok = (mean - 0.6).abs() <= 3.0 * se && (MEASURED_DELTA_R06 / 5.0..=MEASURED_DELTA_R06 * 5.0).contains(&std);
    (ok, format!("mean {mean:.5}, replicate std {std:.5}, |mean - 0.6| / se = {:.2}", (mean - 0.6).abs() / se))
}

fn c10() -> Outcome {
    let rates = PLRates::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for p_e in [0.8, 0.9, 1.0] {
        let mut noise = ShotNoise::new(0, 0);
        let cal = calibrate_rates(&calibration_counts(&rates, p_e, 0, &mut noise), p_e).unwrap();
        for _ in 0..100 {
            let raw: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
            let total: f64 = raw.iter().sum();
            let p = raw.map(|v| v / total);
            let recs = sequence_counts(p, &rates, &Sequence::MEASUREMENT, 0, &mut noise);
            let got = populations_from_counts(&recs, &cal.rates).unwrap();
            for (x, y) in got.raw.iter().zip(&p) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    (worst <= INVERSION_TOL, format!("max population error {worst:.1e}"))
}

fn c11() -> Outcome {
    let start = Instant::now();
    let nv = NVParams::default();
    let (_, carriers) = subspace_h0(&nv);
    let h = pt_hamiltonian_unchecked(0.6);
    let g = grid(NODES);
    let res = dilate(&|_| h.clone(), &DilationConfig::with_grid(g)).unwrap();
    let a = extract_a_series(&res.hsa).unwrap();
    let prog = synthesize(&a, carriers);
    let init = prepare_initial([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], res.eta0()).unwrap();
    let rot = evolve_dilated(&res.hsa, &init, 1).unwrap();
    let fine = TimeGrid::with_step(0.0, 4.0, 0.01 / carriers.max_frequency()).unwrap();
    let lab = simulate_lab_frame(&prog, &nv, &fine, &init).unwrap();
    let devs: Vec<f64> =
        [1.0, 2.0, 4.0].iter().map(|&t| (lab.p0[fine.nearest_index(t)] - rot.p0[g.nearest_index(t)]).abs()).collect();
    let worst = devs.iter().copied().fold(0.0, f64::max);
    (
        worst <= RWA_TOL,
        format!("|P0_lab - P0_rot| at t = 1, 2, 4: {}, {} lab steps in {:.2?}", devs.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(" "), fine.n_steps(), start.elapsed()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("Hermitian-limit exactness", c1),
        ("exceptional point", c2),
        ("unbroken regime", c3),
        ("broken regime", c4),
        ("convergence order", c5),
        ("dilation invariants", c6),
        ("pulse roundtrip", c7),
        ("fit fidelity", c8),
        ("noise chain", c9),
        ("readout inversion", c10),
        ("lab-frame audit", c11),
    ];
    // `cargo test -- --list` and name filters come through as arguments
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (i, (name, _)) in criteria.iter().enumerate() {
            println!("criterion_{}: {name}: test", i + 1);
        }
        return ExitCode::SUCCESS;
    }
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !args.is_empty() && !args.iter().any(|a| id.contains(a.as_str())) {
            continue;
        }
        let (ok, detail) = f();
        println!("{} criterion {:>2} ({name}): {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
