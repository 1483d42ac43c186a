//! Scenario files: TOML with a `[[scenario]]` array.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Seeds all randomness (fit-window jitter).
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "scenario", default)]
    pub scenarios: Vec<Scenario>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    VerifyClosedForm,
    Simulate,
    Transform,
    Gauge,
    Eigen,
    Thresholds,
    DecayFit,
    HardyFree,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::VerifyClosedForm => "verify-closed-form",
            Task::Simulate => "simulate",
            Task::Transform => "transform",
            Task::Gauge => "gauge",
            Task::Eigen => "eigen",
            Task::Thresholds => "thresholds",
            Task::DecayFit => "decay-fit",
            Task::HardyFree => "hardy-free",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub task: Task,
    /// Registry reference, e.g. `harmonic{omega=1}`.
    pub equation: Option<String>,
    /// Registry reference for the initial or stored field.
    pub data: Option<String>,
    #[serde(default)]
    pub transforms: Vec<String>,
    pub grid: Option<GridCfg>,
    #[serde(default)]
    pub probes: Probes,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Probes {
    pub times: Vec<f64>,
    /// End of the equation window; defaults to the largest probe time.
    pub horizon: Option<f64>,
    /// Number of sampled times when `times` is empty (closed-form checks).
    pub count: usize,
    pub dt: f64,
    pub alpha_sq: Vec<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub fourier_window: Option<(f64, f64)>,
    /// Relative half-width of the uniform jitter applied to each window end.
    pub jitter: f64,
    pub jitter_samples: usize,
    pub max_m: usize,
    pub l_max: i64,
    /// Registry references such as `harmonic{omega=1, T=1, alpha=2, beta=2}`.
    pub thresholds: Vec<String>,
}

impl Default for Probes {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            horizon: None,
            count: 20,
            dt: 1e-3,
            alpha_sq: Vec::new(),
            fit_window: None,
            fourier_window: None,
            jitter: 0.0,
            jitter_samples: 0,
            max_m: 5,
            l_max: 2,
            thresholds: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub max_residual: f64,
    pub max_oracle_distance: f64,
    pub max_roundtrip: f64,
    pub max_eigen_residual: f64,
    pub max_rate_error: f64,
    pub ratio_tol: f64,
    pub max_gauge_error: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            max_residual: 1e-6,
            max_oracle_distance: 1e-5,
            max_roundtrip: 1e-9,
            max_eigen_residual: 1e-8,
            max_rate_error: 1e-2,
            ratio_tol: 1e-3,
            max_gauge_error: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub csv: bool,
    pub json: bool,
    /// Write binary field snapshots next to the reports.
    pub snapshots: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { csv: true, json: true, snapshots: false }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            bail!("no [[scenario]] entries");
        }
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                bail!("scenario name `{}` must be non-empty and use [A-Za-z0-9-_.]", s.name);
            }
            if !seen.insert(&s.name) {
                bail!("duplicate scenario name `{}`", s.name);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal() {
        let cfg = Config::parse("[[scenario]]\nname = \"a\"\ntask = \"eigen\"\nequation = \"harmonic{omega=2}\"\n").unwrap();
        assert_eq!(cfg.scenarios[0].task, Task::Eigen);
        assert_eq!(cfg.scenarios[0].probes.dt, 1e-3);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Config::parse("").is_err());
        assert!(Config::parse("[[scenario]]\nname = \"a\"\ntask = \"nope\"\n").is_err());
        assert!(Config::parse("[[scenario]]\nname = \"a\"\ntask = \"eigen\"\nbogus = 1\n").is_err());
        let dup = "[[scenario]]\nname = \"a\"\ntask = \"eigen\"\n[[scenario]]\nname = \"a\"\ntask = \"gauge\"\n";
        assert!(Config::parse(dup).is_err());
    }
}
