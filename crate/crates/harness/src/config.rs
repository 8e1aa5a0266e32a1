//! Experiment configuration, read from TOML.
//!
//! ```toml
//! mode = "rates"
//! d = 1
//! seed = 7
//!
//! [n_grid]
//! log10_start = 3.0
//! log10_stop = 6.0
//! log10_step = 0.5
//!
//! [basis]
//! kind = "haar"      # or "cosine"
//! extra_levels = 4   # or a fixed `level = 10`
//!
//! [[spectra]]
//! preset = "tk-matched"
//!
//! [[spectra]]
//! preset = "polynomial"
//! tau = 1.0
//! alpha = 1.0
//!
//! [mc]
//! replications = 1000
//! outer = 200
//! inner = 500
//! ```

use std::path::{Path, PathBuf};

use gplb_core::adversarial::choose_grid;
use gplb_core::{BasisDescriptor, CosineTensorBasis, HaarTensorBasis, SpectrumPreset};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Largest `d * (level + 1)` an automatic Haar level may reach; explicit
/// levels go up to the transform's own limit.
const AUTO_HAAR_BITS: u32 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Risk,
    Contraction,
    Minimax,
    Wavelet,
    Rates,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_d")]
    pub d: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n_grid: NGrid,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default = "default_spectra")]
    pub spectra: Vec<SpectrumConfig>,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub minimax: MinimaxConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_mode() -> Mode {
    Mode::Rates
}

fn default_d() -> u32 {
    1
}

fn default_spectra() -> Vec<SpectrumConfig> {
    vec![
        SpectrumConfig::TkMatched,
        SpectrumConfig::Polynomial { tau: 1.0, alpha: 1.0 },
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            d: default_d(),
            seed: 0,
            n_grid: NGrid::default(),
            basis: BasisConfig::default(),
            spectra: default_spectra(),
            mc: McConfig::default(),
            minimax: MinimaxConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Either explicit sample sizes or a log10-spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log10_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log10_stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log10_step: Option<f64>,
}

impl Default for NGrid {
    fn default() -> Self {
        Self {
            values: None,
            log10_start: Some(3.0),
            log10_stop: Some(6.0),
            log10_step: Some(0.5),
        }
    }
}

impl NGrid {
    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            log10_start: None,
            log10_stop: None,
            log10_step: None,
        }
    }

    pub fn log10(start: f64, stop: f64, step: f64) -> Self {
        Self {
            values: None,
            log10_start: Some(start),
            log10_stop: Some(stop),
            log10_step: Some(step),
        }
    }

    pub fn resolve(&self) -> Result<Vec<f64>> {
        let values = match (&self.values, self.log10_start, self.log10_stop, self.log10_step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0 && step.is_finite() && start.is_finite() && stop >= start) {
                    return config_err(format!(
                        "n_grid needs finite log10_start <= log10_stop and log10_step > 0 (got {start}, {stop}, {step})"
                    ));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| 10f64.powf(start + i as f64 * step)).collect()
            }
            _ => {
                return config_err(
                    "n_grid takes either `values` or all of `log10_start`, `log10_stop`, `log10_step`".into(),
                )
            }
        };
        if values.is_empty() {
            return config_err("n_grid is empty".into());
        }
        if let Some(bad) = values.iter().find(|n| !(n.is_finite() && **n >= 1.0)) {
            return config_err(format!("n_grid entries must be finite and at least 1, got {bad}"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return config_err("n_grid must be strictly increasing".into());
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[default]
    Haar,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default)]
    pub kind: BasisKind,
    /// Fixed Haar level. When absent each n gets the minimal level for its
    /// grid plus `extra_levels`, capped at `2^18` basis functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    /// Fixed cosine frequency count per axis. When absent, `4 k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<u32>,
    #[serde(default = "default_extra_levels")]
    pub extra_levels: u32,
}

fn default_extra_levels() -> u32 {
    4
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            kind: BasisKind::Haar,
            level: None,
            frequencies: None,
            extra_levels: default_extra_levels(),
        }
    }
}

impl BasisConfig {
    /// The truncation basis for a pyramid grid of `k` cells per axis.
    pub fn for_grid(&self, d: u32, k: u64, n: f64) -> Result<BasisDescriptor> {
        let basis = match self.kind {
            BasisKind::Haar => {
                let minimal = HaarTensorBasis::minimal_level_for(k);
                let level = match self.level {
                    Some(level) => level,
                    None => (minimal + self.extra_levels)
                        .min((AUTO_HAAR_BITS / d).saturating_sub(1))
                        .max(minimal),
                };
                if level < minimal {
                    return config_err(format!(
                        "Haar level {level} cannot resolve the pyramid grid k = {k} at n = {n}; minimal level is {minimal}"
                    ));
                }
                BasisDescriptor::Haar(HaarTensorBasis::new(d, level).map_err(|e| config_core(e, n))?)
            }
            BasisKind::Cosine => {
                let frequencies = self.frequencies.unwrap_or_else(|| (4 * k).min(u32::MAX as u64) as u32);
                BasisDescriptor::Cosine(CosineTensorBasis::new(d, frequencies).map_err(|e| config_core(e, n))?)
            }
        };
        basis.ensure_resolves(k).map_err(|e| config_core(e, n))?;
        Ok(basis)
    }
}

fn config_core(e: gplb_core::Error, n: f64) -> HarnessError {
    HarnessError::Config(format!("infeasible basis at n = {n}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumConfig {
    Polynomial { tau: f64, alpha: f64 },
    Exponential { tau: f64, rate: f64 },
    Flat { value: f64 },
    TkMatched,
}

impl SpectrumConfig {
    pub fn preset(&self) -> SpectrumPreset {
        match *self {
            Self::Polynomial { tau, alpha } => SpectrumPreset::Polynomial { tau, alpha },
            Self::Exponential { tau, rate } => SpectrumPreset::Exponential { tau, rate },
            Self::Flat { value } => SpectrumPreset::Flat { value },
            Self::TkMatched => SpectrumPreset::TkMatched,
        }
    }

    fn validate(&self) -> Result<()> {
        let params: &[(&str, f64)] = match self {
            Self::Polynomial { tau, alpha } => &[("tau", *tau), ("alpha", *alpha)],
            Self::Exponential { tau, rate } => &[("tau", *tau), ("rate", *rate)],
            Self::Flat { value } => &[("value", *value)],
            Self::TkMatched => &[],
        };
        for (name, v) in params {
            if !(v.is_finite() && *v > 0.0) {
                return config_err(format!(
                    "spectrum {}: {name} must be positive and finite, got {v}",
                    self.preset().label()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default = "default_outer")]
    pub outer: u64,
    #[serde(default = "default_inner")]
    pub inner: u64,
}

fn default_replications() -> u64 {
    1000
}

fn default_outer() -> u64 {
    200
}

fn default_inner() -> u64 {
    500
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            outer: default_outer(),
            inner: default_inner(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxConfig {
    /// Scalar grid size of the brute-force minimax search.
    #[serde(default = "default_minimax_grid")]
    pub grid: usize,
}

fn default_minimax_grid() -> usize {
    100_000
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        Self {
            grid: default_minimax_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn config_err<T>(message: String) -> Result<T> {
    Err(HarnessError::Config(message))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return config_err("d must be at least 1".into());
        }
        // keeps the default grid rule and the pyramid count in range
        if self.d > 10 {
            return config_err(format!("d = {} is outside the supported range 1..=10", self.d));
        }
        let grid = self.n_grid.resolve()?;
        for n in &grid {
            choose_grid(self.d, *n).map_err(|e| HarnessError::Config(format!("n = {n}: {e}")))?;
        }
        if self.spectra.is_empty() {
            return config_err("at least one [[spectra]] entry is required".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for s in &self.spectra {
            s.validate()?;
            // rows are grouped by label for slope fits
            if !labels.insert(s.preset().label()) {
                return config_err(format!("spectrum {} is listed twice", s.preset().label()));
            }
        }
        if self.mc.replications < 2 {
            return config_err(format!(
                "mc.replications must be at least 2, got {}",
                self.mc.replications
            ));
        }
        if self.mc.outer < 2 || self.mc.inner < 1 {
            return config_err(format!(
                "mc.outer must be at least 2 and mc.inner at least 1, got {} and {}",
                self.mc.outer, self.mc.inner
            ));
        }
        if self.minimax.grid < 3 {
            return config_err(format!("minimax.grid must be at least 3, got {}", self.minimax.grid));
        }
        if self.basis.kind == BasisKind::Haar && self.basis.frequencies.is_some() {
            return config_err("basis.frequencies applies to the cosine basis only".into());
        }
        if self.basis.kind == BasisKind::Cosine && self.basis.level.is_some() {
            return config_err("basis.level applies to the Haar basis only".into());
        }
        Ok(())
    }

    /// The config with its n grid written out, as embedded in reports.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.n_grid = NGrid::explicit(self.n_grid.resolve()?);
        Ok(out)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.n_grid.resolve().unwrap().len(), 7);
    }

    #[test]
    fn log_grid_hits_the_endpoints() {
        let g = NGrid::log10(3.0, 6.0, 0.5).resolve().unwrap();
        assert_eq!(g[0], 1e3);
        assert!((g[6] - 1e6).abs() < 1e-6);
        assert_eq!(NGrid::log10(2.0, 2.0, 1.0).resolve().unwrap(), vec![100.0]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "d = 0",
            "n_grid = { values = [10.0, 5.0] }",
            "n_grid = { values = [] }",
            "n_grid = { values = [10.0], log10_step = 1.0 }",
            "mc = { replications = 1 }",
            "bogus = 1",
            "[[spectra]]\npreset = \"flat\"\nvalue = -1.0",
            "[[spectra]]\npreset = \"nope\"",
            "basis = { kind = \"haar\", frequencies = 4 }",
            "[[spectra]]\npreset = \"tk-matched\"\n[[spectra]]\npreset = \"tk-matched\"",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml_str(text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn too_coarse_level_names_the_minimal_level() {
        let basis = BasisConfig {
            level: Some(2),
            ..BasisConfig::default()
        };
        let err = basis.for_grid(1, 17, 1e6).unwrap_err().to_string();
        assert!(err.contains("minimal level is 5"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::default().resolved().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
