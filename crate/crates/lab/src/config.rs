//! TOML experiment configuration, schema `oseledets-lab/1`.
//!
//! Validation errors carry the offending field path so a misconfigured run
//! fails fast with exit code 2 and an actionable message.

use std::path::Path;

use serde::Deserialize;

use oseledets_core::dynamics::{BaseMap, Observable, RoofFunction, SuspensionFlow, TrigTerm};

use crate::LabError;

pub const SCHEMA: &str = "oseledets-lab/1";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub k: [i32; 2],
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub a: [[i64; 2]; 2],
    #[serde(default)]
    pub kappa: f64,
    pub roof_r0: f64,
    #[serde(default)]
    pub roof_terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: String,
    pub t_max: f64,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_workers() -> usize {
    1
}

fn default_out() -> String {
    "out".into()
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    #[serde(default = "default_t_grid_max")]
    pub t_grid_max: f64,
    #[serde(default = "default_t_grid_step")]
    pub t_grid_step: f64,
    #[serde(default = "default_po_order")]
    pub po_order: u32,
    #[serde(default = "default_mc_horizon")]
    pub mc_horizon: f64,
}

fn default_t_grid_max() -> f64 {
    2.0
}

fn default_t_grid_step() -> f64 {
    0.1
}

fn default_po_order() -> u32 {
    10
}

fn default_mc_horizon() -> f64 {
    50.0
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            t_grid_max: default_t_grid_max(),
            t_grid_step: default_t_grid_step(),
            po_order: default_po_order(),
            mc_horizon: default_mc_horizon(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
}

fn default_horizons() -> Vec<f64> {
    vec![10.0, 20.0, 30.0, 40.0]
}

fn default_zeta() -> f64 {
    1.5
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { horizons: default_horizons(), zeta: default_zeta() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HillConfig {
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn default_top_k() -> usize {
    1000
}

fn default_bootstrap() -> usize {
    200
}

impl Default for HillConfig {
    fn default() -> Self {
        HillConfig { top_k: default_top_k(), bootstrap: default_bootstrap() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// "step" (indicator of x1 < threshold) or "observable" (sampled from
    /// the configured observable).
    #[serde(default = "default_grid_function")]
    pub function: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_resolution() -> usize {
    128
}

fn default_grid_function() -> String {
    "step".into()
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: default_resolution(),
            function: default_grid_function(),
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerronConfig {
    #[serde(default = "default_systems")]
    pub systems: usize,
    #[serde(default = "default_dim_max")]
    pub dim_max: usize,
    #[serde(default = "default_perron_horizon")]
    pub horizon: f64,
}

fn default_systems() -> usize {
    50
}

fn default_dim_max() -> usize {
    5
}

fn default_perron_horizon() -> f64 {
    10.0
}

impl Default for PerronConfig {
    fn default() -> Self {
        PerronConfig {
            systems: default_systems(),
            dim_max: default_dim_max(),
            horizon: default_perron_horizon(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub flow: FlowConfig,
    #[serde(default)]
    pub observable: Option<ObservableConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub hill: HillConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub perron: PerronConfig,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<(Self, Vec<u8>), LabError> {
        let bytes = std::fs::read(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| LabError::Config(format!("{}: not valid UTF-8", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let err = |path: &str, msg: &str| Err(LabError::Config(format!("{path}: {msg}")));
        if self.schema != SCHEMA {
            return err("schema", &format!("expected \"{SCHEMA}\""));
        }
        if !(self.flow.roof_r0 > 0.0) {
            return err("flow.roof_r0", "must be positive");
        }
        let osc: f64 = self.flow.roof_terms.iter().map(|t| t.amp.abs()).sum();
        if !(self.flow.roof_r0 > osc) {
            return err("flow.roof_terms", "amplitudes must sum below roof_r0");
        }
        if !(self.flow.kappa.is_finite() && self.flow.kappa.abs() < 1.0) {
            return err("flow.kappa", "must be finite with |kappa| < 1");
        }
        if self.run.samples == 0 {
            return err("run.samples", "must be positive");
        }
        if self.run.workers == 0 {
            return err("run.workers", "must be positive");
        }
        if !(self.run.t_max > 0.0) {
            return err("run.t_max", "must be positive");
        }
        if !(self.run.delta > 0.0) {
            return err("run.delta", "must be positive");
        }
        for (i, &e) in self.run.eps.iter().enumerate() {
            if !(e > 0.0) {
                return Err(LabError::Config(format!("run.eps[{i}]: must be positive")));
            }
        }
        if !(self.entropy.t_grid_step > 0.0 && self.entropy.t_grid_step <= 0.1) {
            return err("entropy.t_grid_step", "must lie in (0, 0.1]");
        }
        if self.entropy.po_order == 0 || self.entropy.po_order > 14 {
            return err("entropy.po_order", "must lie in 1..=14");
        }
        if !(self.tail.zeta > 1.0) {
            return err("tail.zeta", "must exceed 1");
        }
        if self.grid.resolution < 2 {
            return err("grid.resolution", "must be at least 2");
        }
        if self.grid.function != "step" && self.grid.function != "observable" {
            return err("grid.function", "must be \"step\" or \"observable\"");
        }
        if self.perron.dim_max < 2 || self.perron.dim_max > 6 {
            return err("perron.dim_max", "must lie in 2..=6");
        }
        Ok(())
    }

    pub fn build_flow(&self) -> Result<SuspensionFlow, LabError> {
        let base = BaseMap::new(self.flow.a, self.flow.kappa)
            .map_err(|e| LabError::Config(format!("flow.a: {e}")))?;
        let terms: Result<Vec<TrigTerm>, _> = self
            .flow
            .roof_terms
            .iter()
            .map(|t| TrigTerm::new(t.k, t.amp, t.phase))
            .collect();
        let terms = terms.map_err(|e| LabError::Config(format!("flow.roof_terms: {e}")))?;
        let roof = RoofFunction::new(self.flow.roof_r0, terms)
            .map_err(|e| LabError::Config(format!("flow.roof_r0: {e}")))?;
        Ok(SuspensionFlow::new(base, roof))
    }

    pub fn build_observable(&self) -> Result<Observable, LabError> {
        let oc = self
            .observable
            .as_ref()
            .ok_or_else(|| LabError::Config("observable: section required for this kind".into()))?;
        let terms: Result<Vec<TrigTerm>, _> =
            oc.terms.iter().map(|t| TrigTerm::new(t.k, t.amp, t.phase)).collect();
        let terms = terms.map_err(|e| LabError::Config(format!("observable.terms: {e}")))?;
        Ok(Observable::new(oc.c0, terms))
    }

    /// Symmetric t-grid for pressure curves.
    pub fn entropy_t_grid(&self) -> Vec<f64> {
        let n = (self.entropy.t_grid_max / self.entropy.t_grid_step).round() as i32;
        (-n..=n).map(|i| i as f64 * self.entropy.t_grid_step).collect()
    }
}
