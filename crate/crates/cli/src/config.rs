//! Run configuration: JSON document, flag overrides and aggregated validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ptdilation::pulse::NVParams;
use ptdilation::readout::{PLRates, DEFAULT_MIN_BRANCH};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "PTDIL_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t0: f64,
    pub t1: f64,
    pub n_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t0: 0.0, t1: 8.0, n_nodes: 8001 }
    }
}

/// NV constants as given in the config; absent fields fall back to defaults
/// except where a command needs them spelled out.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvConfig {
    pub d: Option<f64>,
    pub q: Option<f64>,
    pub a_hf: Option<f64>,
    pub b0: Option<f64>,
    pub gamma_e: Option<f64>,
    pub gamma_n: Option<f64>,
}

impl NvConfig {
    fn fields(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("d", self.d),
            ("q", self.q),
            ("a_hf", self.a_hf),
            ("b0", self.b0),
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
        ]
    }

    pub fn missing(&self) -> Vec<&'static str> {
        self.fields().into_iter().filter(|(_, v)| v.is_none()).map(|(k, _)| k).collect()
    }

    pub fn resolve(&self) -> NVParams {
        let d = NVParams::default();
        NVParams {
            d: self.d.unwrap_or(d.d),
            q: self.q.unwrap_or(d.q),
            a_hf: self.a_hf.unwrap_or(d.a_hf),
            b0: self.b0.unwrap_or(d.b0),
            gamma_e: self.gamma_e.unwrap_or(d.gamma_e),
            gamma_n: self.gamma_n.unwrap_or(d.gamma_n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub r: Option<f64>,
    pub r_list: Option<Vec<f64>>,
    pub grid: GridConfig,
    pub margin: f64,
    pub substeps: usize,
    pub seed: u64,
    /// Shots per pulse sequence for synthetic measurements; 0 disables noise.
    pub repetitions: u64,
    pub p_e: f64,
    pub pl_rates: PLRates,
    /// Smallest measured selected-branch population kept in noisy data.
    pub min_branch: f64,
    /// Spacing of the synthetic measurement times.
    pub sample_step: f64,
    pub r_range: (f64, f64),
    pub nv: Option<NvConfig>,
    pub audit_times: Vec<f64>,
    /// Carrier cycles per step of the lab-frame audit.
    pub audit_cycles_per_step: f64,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            r: None,
            r_list: None,
            grid: GridConfig::default(),
            margin: 0.1,
            substeps: 1,
            seed: 0,
            repetitions: 0,
            p_e: 0.9,
            pl_rates: PLRates::default(),
            min_branch: DEFAULT_MIN_BRANCH,
            sample_step: 0.1,
            r_range: (0.0, 2.0),
            nv: None,
            audit_times: vec![1.0, 2.0, 4.0],
            audit_cycles_per_step: 0.01,
            workers: None,
            output_dir: None,
        }
    }
}

/// What a command needs from the configuration beyond the common checks.
#[derive(Clone, Copy, Debug, Default)]
pub struct Needs {
    pub r_values: bool,
    pub r_list: bool,
    pub full_nv: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    /// `r_list` when given, otherwise the single `r`.
    pub fn r_values(&self) -> Vec<f64> {
        match (&self.r_list, self.r) {
            (Some(list), _) => list.clone(),
            (None, Some(r)) => vec![r],
            (None, None) => Vec::new(),
        }
    }

    pub fn nv_params(&self) -> NVParams {
        self.nv.clone().unwrap_or_default().resolve()
    }

    /// Output directory: flag, then environment, then config, then `./out`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Every violated precondition, in one list.
    pub fn validate(&self, needs: Needs) -> Vec<String> {
        let mut errs = Vec::new();
        if let Some(list) = &self.r_list {
            if list.is_empty() {
                errs.push("r_list is empty".to_string());
            }
        }
        if needs.r_list && self.r_list.is_none() {
            errs.push("r_list is required".to_string());
        }
        if needs.r_values && self.r_values().is_empty() {
            errs.push("no r value given (set r or r_list)".to_string());
        }
        for r in self.r_values() {
            if !(r.is_finite() && r >= 0.0) {
                errs.push(format!("r must be finite and >= 0, got {r}"));
            }
        }
        let g = &self.grid;
        if !(g.t0.is_finite() && g.t1.is_finite() && g.t1 > g.t0) {
            errs.push(format!("grid requires finite t1 > t0, got t0 = {} and t1 = {}", g.t0, g.t1));
        }
        if g.n_nodes < 2 {
            errs.push(format!("grid.n_nodes must be >= 2, got {}", g.n_nodes));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            errs.push(format!("margin must be > 0, got {}", self.margin));
        }
        if self.substeps < 1 {
            errs.push("substeps must be >= 1".to_string());
        }
        if self.workers == Some(0) {
            errs.push("workers must be >= 1".to_string());
        }
        if !(self.p_e > 0.0 && self.p_e <= 1.0) {
            errs.push(format!("p_e must lie in (0, 1], got {}", self.p_e));
        } else if self.repetitions > 0 && (self.p_e - 0.5).abs() < 1e-6 {
            errs.push("p_e = 0.5 makes the rate calibration rank deficient".to_string());
        }
        if let Err(e) = self.pl_rates.validate() {
            errs.push(e.to_string());
        }
        if !(0.0..1.0).contains(&self.min_branch) {
            errs.push(format!("min_branch must lie in [0, 1), got {}", self.min_branch));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            errs.push(format!("sample_step must be > 0, got {}", self.sample_step));
        }
        let (lo, hi) = self.r_range;
        if !(0.0 <= lo && lo < hi && hi <= 2.0) {
            errs.push(format!("r_range must satisfy 0 <= lo < hi <= 2, got ({lo}, {hi})"));
        }
        match &self.nv {
            Some(nv) if needs.full_nv && !nv.missing().is_empty() => {
                errs.push(format!("nv block is missing required fields: {}", nv.missing().join(", ")));
            }
            None if needs.full_nv => {
                let all = NvConfig::default().missing().join(", ");
                errs.push(format!("lab-frame audit requires an nv block with fields: {all}"));
            }
            _ => {}
        }
        if let Err(e) = self.nv_params().validate() {
            errs.push(e.to_string());
        }
        if needs.full_nv {
            for &t in &self.audit_times {
                if !(t > g.t0 && t <= g.t1) {
                    errs.push(format!("audit time {t} lies outside ({}, {}]", g.t0, g.t1));
                }
            }
            if !(self.audit_cycles_per_step > 0.0 && self.audit_cycles_per_step <= 0.02) {
                errs.push(format!("audit_cycles_per_step must lie in (0, 0.02], got {}", self.audit_cycles_per_step));
            }
        }
        errs
    }
}
