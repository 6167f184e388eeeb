//! Subcommand implementations. Each per-r job writes its own files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use ptdilation::dilation::{dilate as run_dilation, verify_dilation, DiagnosticsReport, DilationConfig, DilationResult, Thresholds};
use ptdilation::fitkit::{eigen_curve, fit_r, write_eigen_csv, FitResult};
use ptdilation::io::fmt_f64;
use ptdilation::numkit::{TimeGrid, C64};
use ptdilation::pauli::{extract_a_series, ASeries};
use ptdilation::pulse::{rotating_frame_check, simulate_lab_frame, subspace_h0, synthesize, PulseHeader};
use ptdilation::ptmodel::{p0_unchecked, pt_hamiltonian_unchecked};
use ptdilation::readout::{level_populations, NoiseChain};
use ptdilation::simulator::{evolve_dilated, prepare_initial, write_sweep_csv, Trajectory};

use crate::config::RunConfig;
use crate::fitinput::read_curves;
use crate::output::{per_r, write_csv, write_json, write_rows, Meta};
use crate::CliError;

/// Limit on the B-coefficients of the dilated Hamiltonian.
pub const B_LIMIT: f64 = 1e-9;
/// Limit on the lab-frame deviation of the audit.
pub const RWA_LIMIT: f64 = 0.02;

pub struct Job {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

impl Job {
    fn grid(&self) -> Result<TimeGrid, CliError> {
        let g = &self.cfg.grid;
        Ok(TimeGrid::new(g.t0, g.t1, g.n_nodes)?)
    }

    fn dilation_config(&self) -> Result<DilationConfig, CliError> {
        Ok(DilationConfig::new(self.grid()?, self.cfg.margin, self.cfg.substeps)?)
    }

    fn dilate(&self, r: f64) -> Result<DilationResult, CliError> {
        let h = pt_hamiltonian_unchecked(r);
        Ok(run_dilation(&|_| h.clone(), &self.dilation_config()?)?)
    }

    fn trajectory(&self, res: &DilationResult) -> Result<Trajectory, CliError> {
        let init = prepare_initial([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], res.eta0())?;
        Ok(evolve_dilated(&res.hsa, &init, self.cfg.substeps)?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn per_r(&self, stem: &str, r: f64, ext: &str) -> PathBuf {
        per_r(&self.out_dir, stem, r, ext)
    }
}

/// Runs `f` for every r on the worker pool, keeping the input order.
fn per_r_jobs<T: Send>(rs: &[f64], f: impl Fn(usize, f64) -> Result<T, CliError> + Sync) -> Result<Vec<T>, CliError> {
    rs.par_iter().enumerate().map(|(i, &r)| f(i, r)).collect()
}

fn report(res: &DilationResult, r: f64) -> DiagnosticsReport {
    let h = pt_hamiltonian_unchecked(r);
    verify_dilation(res, &|_| h.clone())
}

pub fn dilate(job: &Job) -> Result<(), CliError> {
    let meta = Meta::new("dilate", &job.cfg);
    per_r_jobs(&job.cfg.r_values(), |_, r| {
        let res = job.dilate(r)?;
        let a = extract_a_series(&res.hsa)?;
        let diagnostics = report(&res, r);
        let m = meta.with(json!({ "r": r, "m0": res.m0 }));
        write_csv(&job.per_r("a_series", r, "csv"), &m, |w| Ok(a.write_csv(w)?))?;
        let payload = json!({
            "r": r,
            "m0": res.m0,
            "mu_prime": res.mu_prime,
            "margin": job.cfg.margin,
            "diagnostics": diagnostics,
            "a_max": a.a_max(),
            "b_max": a.b_max(),
            "b_ratio": a.b_ratio(),
        });
        write_json(&job.per_r("dilation", r, "json"), &m, &payload)
    })?;
    Ok(())
}

#[derive(Serialize)]
struct SimSummary {
    r: f64,
    m0: f64,
    max_oracle_error: f64,
    norm_drift: f64,
    final_p0: f64,
    final_success_prob: f64,
}

pub fn simulate(job: &Job) -> Result<(), CliError> {
    let meta = Meta::new("simulate", &job.cfg);
    let rows = per_r_jobs(&job.cfg.r_values(), |_, r| {
        let res = job.dilate(r)?;
        let traj = job.trajectory(&res)?;
        let oracle: Vec<f64> = traj.grid.times().map(|t| p0_unchecked(r, t)).collect();
        let max_oracle_error = traj.p0.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let m = meta.with(json!({ "r": r, "m0": res.m0 }));
        write_csv(&job.per_r("trajectory", r, "csv"), &m, |w| Ok(traj.write_csv_with_oracle(w, Some(&oracle))?))?;
        let last = traj.p0.len() - 1;
        Ok(SimSummary {
            r,
            m0: res.m0,
            max_oracle_error,
            norm_drift: traj.norm_drift(),
            final_p0: traj.p0[last],
            final_success_prob: traj.success_prob[last],
        })
    })?;
    for s in &rows {
        println!("r = {}: max |P0 - oracle| = {:.3e}", fmt_f64(s.r), s.max_oracle_error);
    }
    let overall = rows.iter().map(|s| s.max_oracle_error).fold(0.0, f64::max);
    println!("max error over all r: {overall:.3e}");
    write_json(&job.path("simulate_summary.json"), &meta.with(json!({})), &json!({ "max_oracle_error": overall, "runs": rows }))
}

/// Grid indices of the synthetic measurement times `t0, t0 + step, …`.
fn sample_indices(grid: &TimeGrid, step: f64) -> Vec<usize> {
    let n = ((grid.t1() - grid.t0()) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| grid.nearest_index(grid.t0() + k as f64 * step)).collect()
}

pub fn sweep(job: &Job) -> Result<(), CliError> {
    let cfg = &job.cfg;
    let grid = job.grid()?;
    let rs = cfg.r_values();
    let noisy = cfg.repetitions > 0;
    let chain = NoiseChain { rates: cfg.pl_rates, p_e: cfg.p_e, repetitions: cfg.repetitions, seed: cfg.seed, min_branch: cfg.min_branch };
    let picks = sample_indices(&grid, cfg.sample_step);
    let results = per_r_jobs(&rs, |i, r| {
        let traj = job.trajectory(&job.dilate(r)?)?;
        let measured = if noisy {
            let finals: Vec<[f64; 4]> = picks.iter().map(|&k| level_populations(&traj.states[k])).collect();
            Some(chain.measure_p0(&finals, i as u64)?)
        } else {
            None
        };
        Ok(((r, traj.p0), measured))
    })?;
    let meta = Meta::new("sweep", cfg);
    let rows: Vec<(f64, Vec<f64>)> = results.iter().map(|(row, _)| row.clone()).collect();
    write_csv(&job.path("sweep_p0.csv"), &meta.with(json!({})), |w| Ok(write_sweep_csv(w, &grid, &rows)?))?;
    if noisy {
        let path = job.path("sweep_p0_noisy.csv");
        let m = meta.with(json!({ "noise": ptdilation::readout::NOISE_ALGORITHM, "replicate_stream": "index of r in r_list" }));
        write_csv(&path, &m, |w| {
            let mut header = vec!["r".to_string()];
            header.extend(picks.iter().map(|&k| fmt_f64(grid.time(k))));
            let body = results.iter().map(|((r, _), measured)| {
                let mut row = vec![fmt_f64(*r)];
                row.extend(measured.as_ref().expect("noisy run").iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
                row
            });
            write_rows(w, &path, std::iter::once(header).chain(body))
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AuditPoint {
    t: f64,
    p0_lab: f64,
    p0_rot: f64,
    deviation: f64,
}

fn lab_audit(job: &Job, res: &DilationResult, a: &ASeries, r: f64, meta: &Meta) -> Result<f64, CliError> {
    let cfg = &job.cfg;
    let nv = cfg.nv_params();
    let (_, carriers) = subspace_h0(&nv);
    let prog = synthesize(a, carriers);
    let rot = job.trajectory(res)?;
    let grid = job.grid()?;
    let t_end = cfg.audit_times.iter().copied().fold(grid.t0(), f64::max);
    let dt = cfg.audit_cycles_per_step / carriers.max_frequency();
    let fine = TimeGrid::with_step(grid.t0(), t_end, dt)?;
    let init = rot.states[0].clone();
    let lab = simulate_lab_frame(&prog, &nv, &fine, &init)?;
    let points: Vec<AuditPoint> = cfg
        .audit_times
        .iter()
        .map(|&t| {
            let (p0_lab, p0_rot) = (lab.p0[fine.nearest_index(t)], rot.p0[grid.nearest_index(t)]);
            AuditPoint { t, p0_lab, p0_rot, deviation: (p0_lab - p0_rot).abs() }
        })
        .collect();
    let max_dev = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let payload = json!({
        "r": r,
        "fine_dt": fine.dt(),
        "cycles_per_step": fine.dt() * carriers.max_frequency(),
        "limit": RWA_LIMIT,
        "max_deviation": max_dev,
        "pass": max_dev <= RWA_LIMIT,
        "points": points,
    });
    write_json(&job.per_r("rwa_audit", r, "json"), &meta.with(json!({ "r": r })), &payload)?;
    Ok(max_dev)
}

pub fn pulses(job: &Job, audit: bool) -> Result<(), CliError> {
    let meta = Meta::new("pulses", &job.cfg);
    let nv = job.cfg.nv_params();
    let (_, carriers) = subspace_h0(&nv);
    let rs = job.cfg.r_values();
    let deviations = per_r_jobs(&rs, |_, r| {
        let res = job.dilate(r)?;
        let a = extract_a_series(&res.hsa)?;
        let prog = synthesize(&a, carriers);
        let residual = rotating_frame_check(&prog, &a);
        let header = PulseHeader { carriers, nv };
        let m = meta.with(json!({ "r": r, "pulse": header, "roundtrip_residual": residual }));
        write_csv(&job.per_r("pulses", r, "csv"), &m, |w| Ok(prog.write_csv(w)?))?;
        if audit {
            lab_audit(job, &res, &a, r, &meta).map(Some)
        } else {
            Ok(None)
        }
    })?;
    let failed: Vec<String> = rs
        .iter()
        .zip(&deviations)
        .filter_map(|(r, d)| d.filter(|d| *d > RWA_LIMIT).map(|d| format!("r = {r}: lab-frame deviation {d:.3e} > {RWA_LIMIT}")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join("; ")))
    }
}

pub fn verify(job: &Job) -> Result<(), CliError> {
    let meta = Meta::new("verify", &job.cfg);
    let limits = Thresholds::default();
    let failures = per_r_jobs(&job.cfg.r_values(), |_, r| {
        let res = job.dilate(r)?;
        let a = extract_a_series(&res.hsa)?;
        let diagnostics = report(&res, r);
        let mut failed: Vec<(&str, f64)> = diagnostics.failures(&limits, job.cfg.margin);
        if a.b_max() > B_LIMIT {
            failed.push(("b_max", a.b_max()));
        }
        let payload = json!({
            "r": r,
            "m0": res.m0,
            "thresholds": limits,
            "b_limit": B_LIMIT,
            "diagnostics": diagnostics,
            "b_max": a.b_max(),
            "failures": failed.iter().map(|(k, v)| json!({ "check": k, "value": v })).collect::<Vec<_>>(),
            "pass": failed.is_empty(),
        });
        write_json(&job.per_r("verify", r, "json"), &meta.with(json!({ "r": r })), &payload)?;
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!("r = {}: {status}", fmt_f64(r));
        Ok(failed.into_iter().map(|(k, v)| format!("r = {r}: {k} = {v:.3e}")).collect::<Vec<_>>())
    })?;
    let all: Vec<String> = failures.into_iter().flatten().collect();
    if all.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(all.join("; ")))
    }
}

pub fn fit(job: &Job, inputs: &[PathBuf]) -> Result<(), CliError> {
    let mut curves = Vec::new();
    for path in inputs {
        curves.extend(read_curves(path)?);
    }
    let range = job.cfg.r_range;
    let fits: Vec<FitResult> = curves
        .par_iter()
        .map(|c| fit_r(&c.samples, range).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let r_nominal: Vec<f64> = curves.iter().map(|c| c.r_nominal).collect();
    let meta = Meta::new("fit", &job.cfg).with(json!({ "inputs": inputs.iter().map(|p| display_name(p)).collect::<Vec<_>>() }));
    let path = job.path("fit_results.csv");
    write_csv(&path, &meta, |w| {
        let header = ["r_nominal", "r_exp", "stderr", "sse", "n_samples", "degenerate"].map(String::from).to_vec();
        let body = r_nominal.iter().zip(&fits).map(|(r, f)| {
            let stderr = if f.stderr.is_finite() { fmt_f64(f.stderr) } else { "inf".into() };
            vec![fmt_f64(*r), fmt_f64(f.r_exp), stderr, fmt_f64(f.sse), f.n_samples.to_string(), f.degenerate.to_string()]
        });
        write_rows(w, &path, std::iter::once(header).chain(body))
    })?;
    let rows = eigen_curve(&r_nominal, &fits)?;
    write_csv(&job.path("eigen_curve.csv"), &meta, |w| Ok(write_eigen_csv(w, &rows)?))?;
    for (r, f) in r_nominal.iter().zip(&fits) {
        println!("r_nominal = {}: r_exp = {:.6} +/- {:.2e}", fmt_f64(*r), f.r_exp, f.stderr);
    }
    Ok(())
}

/// File name only, so metadata does not depend on where inputs live.
fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}
