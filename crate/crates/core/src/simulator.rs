//! Evolution of the system ⊗ ancilla state under `H_sa(t)` and post-selection
//! of the ancilla on `|−⟩`.

use std::io::Write;

use crate::dilation::{ancilla_minus, ancilla_plus, dilate, DilationConfig, DilationResult};
use crate::error::{Error, Result};
use crate::io::{csv_error, csv_writer, flush_error, fmt_f64};
use crate::numkit::{expm, CVector, ComplexMatrix, OperatorSeries, TimeGrid, C64, ZERO};
use crate::ptmodel::pt_hamiltonian_unchecked;

/// Below this squared norm the `|−⟩` branch is treated as empty.
pub const ZERO_BRANCH_NORM: f64 = 1e-30;

/// Amplitudes in the order `|0⟩|0⟩, |0⟩|1⟩, |1⟩|0⟩, |1⟩|1⟩` (system first).
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedState {
    pub amplitudes: [C64; 4],
}

impl CombinedState {
    pub fn new(amplitudes: [C64; 4]) -> Self {
        Self { amplitudes }
    }

    /// `|ψ⟩ ⊗ |a⟩`.
    pub fn product(psi: [C64; 2], a: [C64; 2]) -> Self {
        let mut amplitudes = [ZERO; 4];
        for (s, ps) in psi.iter().enumerate() {
            for (k, ak) in a.iter().enumerate() {
                amplitudes[2 * s + k] = ps * ak;
            }
        }
        Self { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn to_vector(&self) -> CVector {
        CVector::from_column_slice(&self.amplitudes)
    }

    fn from_vector(v: &CVector) -> Self {
        Self { amplitudes: [v[0], v[1], v[2], v[3]] }
    }

    /// System state left after projecting the ancilla on `a` (unnormalized).
    pub fn ancilla_component(&self, a: [C64; 2]) -> [C64; 2] {
        let mut out = [ZERO; 2];
        for (s, o) in out.iter_mut().enumerate() {
            *o = a[0].conj() * self.amplitudes[2 * s] + a[1].conj() * self.amplitudes[2 * s + 1];
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<CombinedState>,
    pub p0: Vec<f64>,
    pub success_prob: Vec<f64>,
}

impl Trajectory {
    /// CSV with header `t,p0,success_prob`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_with_oracle(out, None)
    }

    /// Same as [`Trajectory::write_csv`], with an extra `p0_oracle` column when given.
    pub fn write_csv_with_oracle<W: Write>(&self, out: W, oracle: Option<&[f64]>) -> Result<()> {
        if let Some(o) = oracle {
            if o.len() != self.p0.len() {
                return Err(Error::DimensionMismatch { expected: self.p0.len(), found: o.len() });
            }
        }
        let mut w = csv_writer(out);
        let mut header = vec!["t", "p0", "success_prob"];
        if oracle.is_some() {
            header.push("p0_oracle");
        }
        w.write_record(&header).map_err(csv_error)?;
        for (k, t) in self.grid.times().enumerate() {
            let mut row = vec![fmt_f64(t), fmt_f64(self.p0[k]), fmt_f64(self.success_prob[k])];
            if let Some(o) = oracle {
                row.push(fmt_f64(o[k]));
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(flush_error)
    }

    /// Largest relative deviation of the state norm from its initial value.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.states[0].norm();
        self.states.iter().map(|s| (s.norm() - n0).abs() / n0).fold(0.0, f64::max)
    }
}

/// `(|ψ₀⟩|−⟩ + η₀|ψ₀⟩|+⟩) / √(1 + η₀²)`.
pub fn prepare_initial(psi0: [C64; 2], eta0: f64) -> Result<CombinedState> {
    let n = (psi0[0].norm_sqr() + psi0[1].norm_sqr()).sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("initial state must be normalized, norm is {n}")));
    }
    if !(eta0 >= 0.0 && eta0.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta0 must be finite and >= 0, got {eta0}")));
    }
    let minus = CombinedState::product(psi0, ancilla_minus());
    let plus = CombinedState::product(psi0, ancilla_plus());
    let scale = 1.0 / (1.0 + eta0 * eta0).sqrt();
    let mut amplitudes = [ZERO; 4];
    for (k, a) in amplitudes.iter_mut().enumerate() {
        *a = (minus.amplitudes[k] + plus.amplitudes[k] * eta0) * scale;
    }
    Ok(CombinedState { amplitudes })
}

/// Preparation angle `θ = 2 arctan η₀` of the ancilla.
pub fn preparation_angle(eta0: f64) -> f64 {
    2.0 * eta0.atan()
}

/// Propagates `initial` through `hsa`, with `substeps` exponentials per grid
/// interval at midpoints of the linearly interpolated Hamiltonian.
pub fn evolve_dilated(hsa: &OperatorSeries, initial: &CombinedState, substeps: usize) -> Result<Trajectory> {
    if substeps < 1 {
        return Err(Error::InvalidParameter("substeps must be >= 1".into()));
    }
    if let Some(op) = hsa.ops.first() {
        if op.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: op.dim() });
        }
    }
    let grid = hsa.grid;
    let mut psi = initial.to_vector();
    let mut states = Vec::with_capacity(grid.n_nodes());
    states.push(initial.clone());
    for k in 0..grid.n_steps() {
        let (left, right) = (&hsa.ops[k], &hsa.ops[k + 1]);
        let step = grid.time(k + 1) - grid.time(k);
        for j in 0..substeps {
            let w = (j as f64 + 0.5) / substeps as f64;
            let mid = left.scale(1.0 - w) + right.scale(w);
            let u = expm(&(mid * C64::new(0.0, -step / substeps as f64)));
            psi = u.mul_vec(&psi);
        }
        states.push(CombinedState::from_vector(&psi));
    }
    let mut p0 = Vec::with_capacity(states.len());
    let mut success_prob = Vec::with_capacity(states.len());
    for s in &states {
        let (cond, success) = postselect(s)?;
        p0.push(cond[0].norm_sqr());
        success_prob.push(success);
    }
    Ok(Trajectory { grid, states, p0, success_prob })
}

/// Projects the ancilla onto `|−⟩`. Returns the normalized conditional system
/// state and the success probability.
pub fn postselect(state: &CombinedState) -> Result<([C64; 2], f64)> {
    let total = state.norm();
    if total == 0.0 {
        return Err(Error::ZeroBranch { norm: 0.0 });
    }
    let branch = state.ancilla_component(ancilla_minus());
    let norm_sqr = branch[0].norm_sqr() + branch[1].norm_sqr();
    if norm_sqr < ZERO_BRANCH_NORM {
        return Err(Error::ZeroBranch { norm: norm_sqr.sqrt() });
    }
    let n = norm_sqr.sqrt();
    Ok(([branch[0] / n, branch[1] / n], norm_sqr / (total * total)))
}

/// Post-selected `|⟨0|ψ_cond⟩|²` at every node.
pub fn p0_trajectory(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.states.iter().map(|s| postselect(s).map(|(c, _)| c[0].norm_sqr())).collect()
}

/// Normalizes `v` and rotates its global phase so the largest-magnitude
/// component is real and positive.
pub fn align_phase(v: &[C64]) -> Vec<C64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let pivot = v.iter().copied().fold(ZERO, |best, z| if z.norm() > best.norm() { z } else { best });
    if n == 0.0 || pivot.norm() == 0.0 {
        return v.to_vec();
    }
    let phase = pivot.conj() / pivot.norm();
    v.iter().map(|z| z * phase / n).collect()
}

/// Euclidean distance between two states after [`align_phase`].
pub fn aligned_distance(a: &[C64], b: &[C64]) -> f64 {
    align_phase(a)
        .iter()
        .zip(align_phase(b))
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Dilates `H(r)` on `grid` and evolves `|0⟩` through the result.
pub fn simulate_pt(r: f64, cfg: &DilationConfig) -> Result<(DilationResult, Trajectory)> {
    let h = pt_hamiltonian_unchecked(r);
    let result = dilate(&|_| h.clone(), cfg)?;
    let init = prepare_initial([C64::new(1.0, 0.0), ZERO], result.eta0())?;
    let traj = evolve_dilated(&result.hsa, &init, cfg.substeps)?;
    Ok((result, traj))
}

/// Matrix CSV: header `r,<t_0>,<t_1>,...`, one row per `r`.
pub fn write_sweep_csv<W: Write>(out: W, grid: &TimeGrid, rows: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["r".to_string()];
    header.extend(grid.times().map(fmt_f64));
    w.write_record(&header).map_err(csv_error)?;
    for (r, p0) in rows {
        if p0.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.n_nodes(), found: p0.len() });
        }
        let mut row = vec![fmt_f64(*r)];
        row.extend(p0.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(flush_error)
}

/// Single-operator convenience for tests and callers holding a constant `H_sa`.
pub fn constant_series(grid: TimeGrid, op: ComplexMatrix) -> OperatorSeries {
    OperatorSeries { grid, ops: vec![op; grid.n_nodes()] }
}
