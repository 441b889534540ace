//! Run configuration: TOML sections for the test, simulation design, query
//! and execution settings. Report files embed the resolved config, and a
//! report `.json` can be passed back as `--config` to re-run it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sugar_core::testkit::Method;
use sugar_core::TestConfig;

/// Overrides the output directory regardless of file or flag values.
pub const OUTPUT_DIR_ENV: &str = "SUGAR_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Nonlinear,
    Linear,
    /// `X3 = X1² + X2 + ε3`.
    Vstructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: Model,
    pub d: usize,
    pub zeta: f64,
    pub n_subjects: usize,
    pub n_times: usize,
    /// AR coefficient of the error processes.
    pub phi: f64,
    /// Fraction of structural coefficients zeroed after sampling.
    pub zero_fraction: f64,
    pub replications: usize,
    /// 1-based `(j, k)` pairs evaluated by `experiment`.
    pub edges: Vec<(usize, usize)>,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            model: Model::Nonlinear,
            d: 50,
            zeta: 0.1,
            n_subjects: 20,
            n_times: 100,
            phi: 0.5,
            zero_fraction: 0.0,
            replications: 500,
            edges: Vec::new(),
            alphas: vec![0.05],
            methods: vec![Method::Sugar],
        }
    }
}

/// Inputs of the single-dataset commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    pub data: Option<PathBuf>,
    pub j: Option<usize>,
    pub k: Option<usize>,
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// FDR level for `fdr-sweep`.
    pub q: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            data: None,
            j: None,
            k: None,
            nodes: Vec::new(),
            edges: Vec::new(),
            q: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionConfig {
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            workers: 0,
            output_dir: PathBuf::from("sugar-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub test: TestConfig,
    pub simulation: SimulationConfig,
    pub query: QueryConfig,
    pub execution: ExecutionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            test: TestConfig::default(),
            simulation: SimulationConfig::default(),
            query: QueryConfig::default(),
            execution: ExecutionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a TOML config, or the `config` field of a JSON report.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let config = value.get("config").context("report has no embedded config")?;
            return Ok(serde_json::from_value(config.clone())?);
        }
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Applies the output-directory environment override.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
            self.execution.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.test.validate()?;
        let sim = &self.simulation;
        if sim.d == 0 || sim.n_subjects < 2 || sim.n_times == 0 {
            bail!("simulation needs d ≥ 1, at least 2 subjects and T ≥ 1");
        }
        if !(0.0..=1.0).contains(&sim.zeta) || !(0.0..=1.0).contains(&sim.zero_fraction) {
            bail!("zeta and zero_fraction must lie in [0, 1]");
        }
        if !(sim.phi.abs() < 1.0) {
            bail!("AR coefficient phi must satisfy |phi| < 1, got {}", sim.phi);
        }
        if sim.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            bail!("alpha levels must lie in (0, 1)");
        }
        if !(self.query.q > 0.0 && self.query.q < 1.0) {
            bail!("FDR level q must lie in (0, 1), got {}", self.query.q);
        }
        Ok(())
    }
}
