//! Hermitian dilation of a non-Hermitian generator `H_s(t)` onto
//! system ⊗ ancilla.
//!
//! The combined state is `|ψ⟩|−⟩ + η|ψ⟩|+⟩` with `M = η†η + I` obeying
//! `i dM/dt = H_s† M − M H_s`, so `M(t) = [ε⁻¹(t)]† M(0) ε⁻¹(t)` where `ε` is the
//! propagator of `H_s`. With `η = (M − I)^{1/2}` the dilated Hamiltonian is
//! `H_sa = Λ ⊗ I + Γ ⊗ σ_z`,
//!
//! ```text
//! Λ = {H_s + [i η' + η H_s] η} M⁻¹
//! Γ = i [H_s η − η H_s − i η'] M⁻¹
//! ```
//!
//! `M` spans many orders of magnitude in the broken regime (its condition
//! number reaches 1e13 over the demo window), so the engine never
//! diagonalizes the assembled `M`. It carries the factor `G = √m0 ε⁻¹`
//! (`M = G†G`) and reads the eigenbasis of `M` off the singular value
//! decomposition of `G`; `η`, `η'`, `Λ` and `Γ` are then formed entrywise in
//! that basis.

use crate::error::{Error, Result};
use crate::numkit::{
    expm, ordered_propagator_refined, pauli, spectral_compose, sylvester_diagonal, ComplexMatrix,
    OperatorSeries, TimeGrid, C64, I, ZERO,
};

/// Largest tolerated condition number of the system propagator.
pub const MAX_PROPAGATOR_CONDITION: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilationConfig {
    pub grid: TimeGrid,
    /// Safety factor in the choice of `M(0)`: the smallest eigenvalue of `M(t)`
    /// over the grid is `1 + margin`.
    pub margin: f64,
    /// Propagation steps per grid interval.
    pub substeps: usize,
}

impl DilationConfig {
    pub fn new(grid: TimeGrid, margin: f64, substeps: usize) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter(format!("margin must be > 0, got {margin}")));
        }
        if substeps < 1 {
            return Err(Error::InvalidParameter("substeps must be >= 1".into()));
        }
        Ok(Self { grid, margin, substeps })
    }

    /// Default margin 0.1 and one propagation step per interval.
    pub fn with_grid(grid: TimeGrid) -> Self {
        Self { grid, margin: 0.1, substeps: 1 }
    }
}

/// Scalar initial metric `M(0) = m0 I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialMetric {
    pub m0: f64,
    /// Minimum over the grid of the smallest eigenvalue of `[ε⁻¹]† ε⁻¹`.
    pub mu_prime: f64,
}

/// `M(t)` together with its factor `G(t)`, `M = G† G`.
#[derive(Clone, Debug)]
pub struct MetricSeries {
    pub m0: f64,
    pub factor: OperatorSeries,
    pub metric: OperatorSeries,
}

/// Eigenbasis of `M(t_k)` (shared with `η(t_k)`) and the derived spectra.
#[derive(Clone, Debug)]
pub struct NodeSpectrum {
    pub vectors: ComplexMatrix,
    pub metric_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// `dη/dt` expressed in `vectors`.
    pub deta_rotated: ComplexMatrix,
    /// `H_s(t_k)` expressed in `vectors`.
    pub hamiltonian_rotated: ComplexMatrix,
}

#[derive(Clone, Debug)]
pub struct EtaSeries {
    pub eta: OperatorSeries,
    pub deta: OperatorSeries,
    pub spectra: Vec<NodeSpectrum>,
}

#[derive(Clone, Debug)]
pub struct LambdaGamma {
    pub lambda: OperatorSeries,
    pub gamma: OperatorSeries,
    /// Relative Hermiticity residual of `Λ` before symmetrization, per node.
    pub lambda_residual: Vec<f64>,
    /// Relative Hermiticity residual of `Γ` before symmetrization, per node.
    pub gamma_residual: Vec<f64>,
}

/// Everything the dilation produces on the grid.
#[derive(Clone, Debug)]
pub struct DilationResult {
    pub m0: f64,
    pub mu_prime: f64,
    pub metric: MetricSeries,
    pub eta: EtaSeries,
    pub lambda_gamma: LambdaGamma,
    pub hsa: OperatorSeries,
}

impl DilationResult {
    pub fn grid(&self) -> &TimeGrid {
        &self.hsa.grid
    }

    /// `η(t0)` restricted to a scalar, valid when `M(0)` is scalar.
    pub fn eta0(&self) -> f64 {
        (self.m0 - 1.0).sqrt()
    }
}

/// Picks `M(0) = m0 I` so that `M(t)` keeps every eigenvalue at or above
/// `1 + margin` on the grid.
pub fn choose_initial_m<F>(h_s: &F, cfg: &DilationConfig) -> Result<InitialMetric>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let eps1 = ordered_propagator_refined(|t| h_s(t) * C64::new(0.0, -1.0), &cfg.grid, cfg.substeps);
    let mut mu_prime = f64::INFINITY;
    for (t, u) in eps1.iter() {
        let s = u.singular_values();
        let (smax, smin) = (s[0], s[s.len() - 1]);
        let condition = smax / smin;
        if !condition.is_finite() || condition > MAX_PROPAGATOR_CONDITION {
            return Err(Error::SingularPropagator { t, condition });
        }
        // smallest eigenvalue of [ε⁻¹]† ε⁻¹ is 1/σ_max(ε)²
        mu_prime = mu_prime.min(1.0 / (smax * smax));
    }
    Ok(InitialMetric { m0: (1.0 + cfg.margin) / mu_prime, mu_prime })
}

/// Propagates `M(t) = [ε⁻¹]† (m0 I) ε⁻¹` step by step through its factor.
pub fn m_series<F>(h_s: &F, m0: f64, cfg: &DilationConfig) -> Result<MetricSeries>
where
    F: Fn(f64) -> ComplexMatrix,
{
    if !(m0 > 1.0 && m0.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial metric scale must exceed 1, got {m0}")));
    }
    let grid = cfg.grid;
    let fine = grid.refine(cfg.substeps);
    let h = fine.dt();
    let dim = h_s(grid.t0()).dim();

    let mut g = ComplexMatrix::identity(dim).scale(m0.sqrt());
    let mut factors = Vec::with_capacity(grid.n_nodes());
    factors.push(g.clone());
    for k in 0..fine.n_steps() {
        // ε⁻¹(t + h) = ε⁻¹(t) expm(i h H_s(t + h/2))
        let step = expm(&(h_s(fine.time(k) + 0.5 * h) * C64::new(0.0, h)));
        g = &g * &step;
        if (k + 1) % cfg.substeps == 0 {
            factors.push(g.clone());
        }
    }

    let mut metrics = Vec::with_capacity(factors.len());
    for (k, g) in factors.iter().enumerate() {
        let s = g.singular_values();
        let smin = s[s.len() - 1];
        let excess = smin * smin - 1.0;
        if !(excess > 0.0) {
            return Err(Error::PositivityLost { t: grid.time(k), min_excess: excess });
        }
        metrics.push((&g.adjoint() * g).hermitian_part());
    }
    Ok(MetricSeries {
        m0,
        factor: OperatorSeries::new(grid, factors)?,
        metric: OperatorSeries::new(grid, metrics)?,
    })
}

/// Eigenbasis of `G† G` from the SVD of `G`, eigenvalues ascending.
fn factor_spectrum(g: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>) {
    let svd = g.inner().clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let n = g.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    // rows of V† are the conjugated right singular vectors
    let vectors = ComplexMatrix::from_fn(n, |i, j| v_t[(order[j], i)].conj());
    let values = order.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
    (vectors, values)
}

/// `η = (M − I)^{1/2}` and `dη/dt` from the Sylvester equation
/// `η X + X η = dM/dt`, `dM/dt = −i (H_s† M − M H_s)`.
pub fn eta_series<F>(h_s: &F, metric: &MetricSeries) -> Result<EtaSeries>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let grid = metric.factor.grid;
    let mut etas = Vec::with_capacity(grid.n_nodes());
    let mut detas = Vec::with_capacity(grid.n_nodes());
    let mut spectra = Vec::with_capacity(grid.n_nodes());
    for (k, (t, g)) in metric.factor.iter().enumerate() {
        let (vectors, metric_values) = factor_spectrum(g);
        let eta_values = metric_values
            .iter()
            .map(|&m| {
                if m - 1.0 > 0.0 {
                    Ok((m - 1.0).sqrt())
                } else {
                    Err(Error::PositivityLost { t: grid.time(k), min_excess: m - 1.0 })
                }
            })
            .collect::<Result<Vec<f64>>>()?;

        let h_rot = h_s(t).congruence(&vectors);
        let h_rot_adj = h_rot.adjoint();
        let n = h_rot.dim();
        let dm_rot = ComplexMatrix::from_fn(n, |i, j| {
            (h_rot_adj[(i, j)] * metric_values[j] - h_rot[(i, j)] * metric_values[i]) * C64::new(0.0, -1.0)
        })
        .hermitian_part();
        let scale = eta_values.iter().fold(0.0_f64, |a, &b| a.max(b));
        let deta_rotated = sylvester_diagonal(&eta_values, &dm_rot, scale)?.hermitian_part();

        etas.push(spectral_compose(&vectors, &eta_values));
        detas.push((&(&vectors * &deta_rotated) * &vectors.adjoint()).hermitian_part());
        spectra.push(NodeSpectrum {
            vectors,
            metric_values,
            eta_values,
            deta_rotated,
            hamiltonian_rotated: h_rot,
        });
    }
    Ok(EtaSeries {
        eta: OperatorSeries::new(grid, etas)?,
        deta: OperatorSeries::new(grid, detas)?,
        spectra,
    })
}

fn relative_hermitian_residual(m: &ComplexMatrix) -> f64 {
    let scale = m.max_abs();
    if scale == 0.0 {
        0.0
    } else {
        m.hermitian_residual() / scale
    }
}

/// `Λ(t)` and `Γ(t)` at every node, symmetrized, with the pre-symmetrization
/// residuals kept as diagnostics.
pub fn lambda_gamma(eta: &EtaSeries) -> Result<LambdaGamma> {
    let grid = eta.eta.grid;
    let mut lambdas = Vec::with_capacity(grid.n_nodes());
    let mut gammas = Vec::with_capacity(grid.n_nodes());
    let mut lambda_residual = Vec::with_capacity(grid.n_nodes());
    let mut gamma_residual = Vec::with_capacity(grid.n_nodes());
    for spec in &eta.spectra {
        let (h, d) = (&spec.hamiltonian_rotated, &spec.deta_rotated);
        let (e, m) = (&spec.eta_values, &spec.metric_values);
        let n = h.dim();
        // diagonal η and M make every product entrywise
        let lam = ComplexMatrix::from_fn(n, |i, j| {
            (h[(i, j)] * (1.0 + e[i] * e[j]) + I * d[(i, j)] * e[j]) / m[j]
        });
        let gam = ComplexMatrix::from_fn(n, |i, j| (I * h[(i, j)] * (e[j] - e[i]) + d[(i, j)]) / m[j]);
        lambda_residual.push(relative_hermitian_residual(&lam));
        gamma_residual.push(relative_hermitian_residual(&gam));
        let v = &spec.vectors;
        lambdas.push((&(v * &lam.hermitian_part()) * &v.adjoint()).hermitian_part());
        gammas.push((&(v * &gam.hermitian_part()) * &v.adjoint()).hermitian_part());
    }
    Ok(LambdaGamma {
        lambda: OperatorSeries::new(grid, lambdas)?,
        gamma: OperatorSeries::new(grid, gammas)?,
        lambda_residual,
        gamma_residual,
    })
}

/// `Λ ⊗ I + Γ ⊗ σ_z`, system factor first, ancilla basis `{|0⟩, |1⟩}`.
pub fn dilated_operator(lambda: &ComplexMatrix, gamma: &ComplexMatrix) -> ComplexMatrix {
    lambda.kron(&pauli(0)) + gamma.kron(&pauli(3))
}

pub fn dilated_hamiltonian(lambda: &OperatorSeries, gamma: &OperatorSeries) -> Result<OperatorSeries> {
    if lambda.len() != gamma.len() {
        return Err(Error::DimensionMismatch { expected: lambda.len(), found: gamma.len() });
    }
    let ops = lambda.ops.iter().zip(&gamma.ops).map(|(l, g)| dilated_operator(l, g)).collect();
    OperatorSeries::new(lambda.grid, ops)
}

/// Runs the whole construction with `M(0)` chosen by [`choose_initial_m`].
pub fn dilate<F>(h_s: &F, cfg: &DilationConfig) -> Result<DilationResult>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let init = choose_initial_m(h_s, cfg)?;
    dilate_with_m0(h_s, cfg, init.m0, init.mu_prime)
}

/// Runs the construction with a caller-supplied `m0 > 1`.
pub fn dilate_with_m0<F>(h_s: &F, cfg: &DilationConfig, m0: f64, mu_prime: f64) -> Result<DilationResult>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let metric = m_series(h_s, m0, cfg)?;
    let eta = eta_series(h_s, &metric)?;
    let lg = lambda_gamma(&eta)?;
    let hsa = dilated_hamiltonian(&lg.lambda, &lg.gamma)?;
    let worst = lg
        .lambda_residual
        .iter()
        .chain(&lg.gamma_residual)
        .fold(0.0_f64, |a, &b| a.max(b));
    log::debug!("dilation: m0 = {m0:e}, max pre-symmetrization residual {worst:e}");
    Ok(DilationResult { m0, mu_prime, metric, eta, lambda_gamma: lg, hsa })
}

/// Ancilla `|−⟩ = (|0⟩ − i|1⟩)/√2`.
pub fn ancilla_minus() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(s, 0.0), C64::new(0.0, -s)]
}

/// Ancilla `|+⟩ = −i(|0⟩ + i|1⟩)/√2`.
pub fn ancilla_plus() -> [C64; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(0.0, -s), C64::new(s, 0.0)]
}

/// System block `(I ⊗ ⟨a|) H (I ⊗ |b⟩)` of a system ⊗ qubit operator.
pub fn ancilla_block(h: &ComplexMatrix, a: [C64; 2], b: [C64; 2]) -> ComplexMatrix {
    let n = h.dim() / 2;
    ComplexMatrix::from_fn(n, |i, j| {
        let mut acc = ZERO;
        for (alpha, a_alpha) in a.iter().enumerate() {
            for (beta, b_beta) in b.iter().enumerate() {
                acc += a_alpha.conj() * h[(2 * i + alpha, 2 * j + beta)] * b_beta;
            }
        }
        acc
    })
}

/// Self-consistency residuals of a finished dilation (maxima over the grid).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DiagnosticsReport {
    /// max |H_sa − H_sa†| / |H_sa| of the assembled operator.
    pub hsa_hermiticity: f64,
    /// Largest relative Hermiticity residual of `Λ`, `Γ` before symmetrization.
    pub pre_symmetrization: f64,
    /// `|i d(η²)/dt − H_s†(η²+I) + (η²+I)H_s| / |M|`, central differences on interior nodes.
    pub metric_equation: f64,
    /// `|H^(−+) + H^(+−)| / |H_sa|` in the `{|+⟩, |−⟩}` ancilla basis.
    pub block_antisymmetry: f64,
    /// Residual of the branch equations `H^(−−) + H^(−+)η = H_s` and
    /// `H^(+−) + H^(++)η = iη' + ηH_s`, relative to `(1 + |η|)(|H_s| + |H_sa|)`.
    pub branch_equations: f64,
    /// `|[η, M]| / (|η| |M|)`.
    pub eta_metric_commutator: f64,
    /// Smallest eigenvalue of `M − I` over the grid.
    pub min_metric_excess: f64,
}

/// Acceptance limits for a [`DiagnosticsReport`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Thresholds {
    pub hsa_hermiticity: f64,
    pub metric_equation: f64,
    pub block_antisymmetry: f64,
    pub branch_equations: f64,
    pub eta_metric_commutator: f64,
    /// Required fraction of the configured margin in `min eig(M − I)`.
    pub excess_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            hsa_hermiticity: 1e-10,
            metric_equation: 1e-5,
            block_antisymmetry: 1e-9,
            branch_equations: 1e-9,
            eta_metric_commutator: 1e-10,
            excess_fraction: 0.99,
        }
    }
}

impl DiagnosticsReport {
    /// Names and values of the residuals that exceed `limits`.
    pub fn failures(&self, limits: &Thresholds, margin: f64) -> Vec<(&'static str, f64)> {
        let checks = [
            ("hsa_hermiticity", self.hsa_hermiticity, self.hsa_hermiticity <= limits.hsa_hermiticity),
            ("metric_equation", self.metric_equation, self.metric_equation <= limits.metric_equation),
            ("block_antisymmetry", self.block_antisymmetry, self.block_antisymmetry <= limits.block_antisymmetry),
            ("branch_equations", self.branch_equations, self.branch_equations <= limits.branch_equations),
            (
                "eta_metric_commutator",
                self.eta_metric_commutator,
                self.eta_metric_commutator <= limits.eta_metric_commutator,
            ),
            ("min_metric_excess", self.min_metric_excess, self.min_metric_excess >= limits.excess_fraction * margin),
        ];
        checks.into_iter().filter(|c| !c.2).map(|c| (c.0, c.1)).collect()
    }
}

pub fn verify_dilation<F>(result: &DilationResult, h_s: &F) -> DiagnosticsReport
where
    F: Fn(f64) -> ComplexMatrix,
{
    let grid = result.grid();
    let dt = grid.dt();
    let minus = ancilla_minus();
    let plus = ancilla_plus();
    let eta = &result.eta.eta.ops;
    let deta = &result.eta.deta.ops;
    let metric = &result.metric.metric.ops;

    let mut report = DiagnosticsReport {
        hsa_hermiticity: 0.0,
        pre_symmetrization: result
            .lambda_gamma
            .lambda_residual
            .iter()
            .chain(&result.lambda_gamma.gamma_residual)
            .fold(0.0, |a, &b| a.max(b)),
        metric_equation: 0.0,
        block_antisymmetry: 0.0,
        branch_equations: 0.0,
        eta_metric_commutator: 0.0,
        min_metric_excess: f64::INFINITY,
    };

    let n = grid.n_nodes();
    let eta_sq_plus_one =
        |k: usize| (&eta[k] * &eta[k]).hermitian_part() + ComplexMatrix::identity(eta[k].dim());
    for k in 0..n {
        let t = grid.time(k);
        let hs = h_s(t);
        let hsa = &result.hsa.ops[k];
        let hsa_norm = hsa.opnorm().max(f64::MIN_POSITIVE);
        report.hsa_hermiticity = report.hsa_hermiticity.max(hsa.hermitian_residual() / hsa_norm);

        let mp = ancilla_block(hsa, minus, plus);
        let pm = ancilla_block(hsa, plus, minus);
        let mm = ancilla_block(hsa, minus, minus);
        let pp = ancilla_block(hsa, plus, plus);
        report.block_antisymmetry = report.block_antisymmetry.max((&mp + &pm).opnorm() / hsa_norm);

        let eta_norm = eta[k].opnorm();
        let scale = (1.0 + eta_norm) * (hs.opnorm() + hsa_norm);
        let first = &(&mm + &(&mp * &eta[k])) - &hs;
        let second = &(&(&pm + &(&pp * &eta[k])) - &(&deta[k] * I)) - &(&eta[k] * &hs);
        report.branch_equations = report.branch_equations.max(first.opnorm().max(second.opnorm()) / scale);

        let m_norm = metric[k].opnorm();
        report.eta_metric_commutator = report
            .eta_metric_commutator
            .max(eta[k].commutator(&metric[k]).opnorm() / (m_norm * eta_norm.max(1.0)));
        let excess = result.eta.spectra[k].metric_values[0] - 1.0;
        report.min_metric_excess = report.min_metric_excess.min(excess);

        if k > 0 && k + 1 < n {
            let m_k = eta_sq_plus_one(k);
            let dm = (&eta_sq_plus_one(k + 1) - &eta_sq_plus_one(k - 1)).scale(0.5 / dt);
            let rhs = &(&hs.adjoint() * &m_k) - &(&m_k * &hs);
            let res = &(&dm * I) - &rhs;
            report.metric_equation = report.metric_equation.max(res.opnorm() / m_k.opnorm());
        }
    }
    report
}

/// `Λ` and `Γ` evaluated directly from their defining matrix products, for
/// cross-checking the eigenbasis evaluation on well-conditioned inputs.
pub fn lambda_gamma_direct(
    h_s: &ComplexMatrix,
    metric: &ComplexMatrix,
    eta: &ComplexMatrix,
    deta: &ComplexMatrix,
) -> Option<(ComplexMatrix, ComplexMatrix)> {
    let m_inv = metric.try_inverse()?;
    let inner = &(deta * I) + &(eta * h_s);
    let lambda = &(h_s + &(&inner * eta)) * &m_inv;
    let gamma = &(&(&(h_s * eta) - &(eta * h_s)) - &(deta * I)) * &m_inv * I;
    Some((lambda, gamma))
}
