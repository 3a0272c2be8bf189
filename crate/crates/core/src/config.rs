//! Run configuration: a versioned JSON document naming the model, the
//! coupling (or a grid of couplings) and the tolerances of every check.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::Tolerances;
use crate::error::{Error, Result};
use crate::models::{build_phi4, build_spin, Model, SiteAndBond, DEFAULT_RAW_DIM};

pub const SCHEMA: &str = "lsbd.run/1";

fn default_raw_dim() -> usize {
    DEFAULT_RAW_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    /// `−d²/dx² + x² + x⁴` per site, `x ⊗ x` bonds, truncated to `dim` levels.
    Phi4 {
        sites: usize,
        dim: usize,
        #[serde(default = "default_raw_dim")]
        raw_dim: usize,
    },
    /// On-site and bond matrices from a spec file; the two-level Ising pair
    /// when no file is given. Relative paths resolve against the config file.
    Spin {
        sites: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec_file: Option<PathBuf>,
    },
    /// Matrices inline, same layout as a spec file.
    Custom {
        sites: usize,
        onsite: Vec<[f64; 2]>,
        bond: Vec<[f64; 2]>,
    },
}

impl ModelConfig {
    pub fn sites(&self) -> usize {
        match self {
            ModelConfig::Phi4 { sites, .. } | ModelConfig::Spin { sites, .. } | ModelConfig::Custom { sites, .. } => *sites,
        }
    }

    pub fn with_sites(&self, n: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelConfig::Phi4 { sites, .. } | ModelConfig::Spin { sites, .. } | ModelConfig::Custom { sites, .. } => *sites = n,
        }
        out
    }

    pub fn build(&self) -> Result<Model> {
        match self {
            ModelConfig::Phi4 { sites, dim, raw_dim } => build_phi4(*sites, *dim, *raw_dim),
            ModelConfig::Spin { sites, spec_file } => {
                let spec = match spec_file {
                    Some(p) => SiteAndBond::from_path(p)?,
                    None => SiteAndBond::two_level_ising(),
                };
                build_spin(*sites, &spec)
            }
            ModelConfig::Custom { sites, onsite, bond } => build_spin(*sites, &SiteAndBond::from_flat(onsite, bond)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunTolerances {
    pub series: f64,
    /// Per-step off-block residual and final block-diagonality.
    pub offdiag: f64,
    /// Allowed negativity of the compressed form inequality.
    pub psd: f64,
    /// Spectrum agreement with the exact oracle.
    pub spectrum: f64,
    /// Allowed shortfall of certified gaps below 1/2.
    pub gap_slack: f64,
    /// Slack on resolvent and series norm inequalities.
    pub norm_slack: f64,
    pub gap_floor: f64,
    pub prune: f64,
    pub divergence: f64,
}

impl Default for RunTolerances {
    fn default() -> Self {
        let e = Tolerances::default();
        RunTolerances {
            series: e.series,
            offdiag: e.offdiag,
            psd: 1e-9,
            spectrum: 1e-8,
            gap_slack: 1e-6,
            norm_slack: 1e-9,
            gap_floor: e.gap_floor,
            prune: e.prune,
            divergence: e.divergence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebugFlags {
    /// Recompute conjugated entries as `U Y U†` and compare.
    pub unitary_check: bool,
    /// Re-run φ⁴ models at `dim + 2` and report the change in the final gap.
    pub truncation_audit: bool,
    /// Compare the spectrum after every step with the exact one while `d^N`
    /// stays at or below this.
    pub step_spectrum_budget: usize,
}

impl Default for DebugFlags {
    fn default() -> Self {
        DebugFlags {
            unitary_check: false,
            truncation_audit: false,
            step_spectrum_budget: 1024,
        }
    }
}

fn default_max_order() -> usize {
    Tolerances::default().max_order
}

fn default_budget() -> usize {
    crate::operator::MAX_CHAIN_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Chain lengths for a scan; the model's own length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_sites: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: RunTolerances,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default = "default_budget")]
    pub oracle_budget: usize,
    #[serde(default)]
    pub debug: DebugFlags,
}

impl RunConfig {
    pub fn new(model: ModelConfig, t: f64) -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            model,
            t: Some(t),
            t_grid: None,
            scan_sites: None,
            tolerances: RunTolerances::default(),
            max_order: default_max_order(),
            oracle_budget: default_budget(),
            debug: DebugFlags::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse and validate; a relative `spec_file` is taken relative to the
    /// config's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        if let ModelConfig::Spin { spec_file: Some(p), .. } = &mut cfg.model {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema != SCHEMA {
            return bad(format!("unsupported schema {:?}, expected {SCHEMA:?}", self.schema));
        }
        if self.model.sites() < 2 {
            return bad("model needs at least 2 sites".into());
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("series", tol.series),
            ("offdiag", tol.offdiag),
            ("psd", tol.psd),
            ("spectrum", tol.spectrum),
            ("gap_slack", tol.gap_slack),
            ("norm_slack", tol.norm_slack),
            ("gap_floor", tol.gap_floor),
            ("prune", tol.prune),
            ("divergence", tol.divergence),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        if self.max_order == 0 {
            return bad("max_order must be at least 1".into());
        }
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("t must be finite and non-negative, got {t}"));
            }
        }
        if let Some(grid) = &self.t_grid {
            if grid.is_empty() {
                return bad("t_grid is empty".into());
            }
            if grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return bad("t_grid values must be finite and non-negative".into());
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return bad("t_grid must be strictly increasing".into());
            }
        }
        if let Some(ns) = &self.scan_sites {
            if ns.is_empty() || ns.iter().any(|&n| n < 2) {
                return bad("scan_sites must be non-empty with every entry >= 2".into());
            }
        }
        Ok(())
    }

    pub fn require_t(&self) -> Result<f64> {
        self.t.ok_or_else(|| Error::Config("this command needs \"t\"".into()))
    }

    pub fn require_grid(&self) -> Result<&[f64]> {
        self.t_grid
            .as_deref()
            .ok_or_else(|| Error::Config("this command needs \"t_grid\"".into()))
    }

    pub fn engine_tolerances(&self) -> Tolerances {
        let tol = &self.tolerances;
        Tolerances {
            series: tol.series,
            offdiag: tol.offdiag,
            gap_floor: tol.gap_floor,
            prune: tol.prune,
            max_order: self.max_order,
            divergence: tol.divergence,
            unitary_check: self.debug.unitary_check,
        }
    }
}
