//! JSON run configuration shared by every CLI command.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::evolve::EvolveConfig;
use crate::grid::{ModelParams, ProfileKind, RadialGrid};
use crate::steady::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "R_dom")]
    pub r_dom: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 1024, r_dom: 3.0 }
    }
}

impl GridConfig {
    pub fn build(&self, n_dim: usize) -> crate::Result<Arc<RadialGrid>> {
        RadialGrid::uniform(n_dim, self.n, self.r_dom)
    }
}

fn default_random_inits() -> usize {
    2
}

fn default_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    /// Strictly decreasing orders for the sweeps; each command has its own default.
    #[serde(default)]
    pub s_list: Option<Vec<f64>>,
    /// Density for `energy`, `gamma` and `evolve`.
    #[serde(default)]
    pub fixture: Option<ProfileKind>,
    /// Sharp-constant estimate used to classify the fair regime.
    #[serde(default)]
    pub hstar: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Extra random starts for the sharp-constant estimate.
    #[serde(default = "default_random_inits")]
    pub random_inits: usize,
    /// Relative multiplicative noise applied to the steady state before `evolve`.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Parent of the run directories; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(model: ModelParams) -> Self {
        RunConfig {
            model,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            evolve: EvolveConfig::default(),
            s_list: None,
            fixture: None,
            hstar: None,
            seed: 0,
            random_inits: default_random_inits(),
            noise: default_noise(),
            out: None,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut add = |section: &str, list: Vec<(&'static str, String)>| {
            out.extend(list.into_iter().map(|(name, message)| Violation {
                field: format!("{section}.{name}"),
                message,
            }));
        };
        add("model", self.model.violations());
        add("solver", self.solver.violations());
        add("evolve", self.evolve.violations());
        let mut misc = Vec::new();
        if self.grid.n < 2 {
            misc.push(("n", "n must be >= 2".to_string()));
        }
        if !(self.grid.r_dom.is_finite() && self.grid.r_dom > 0.0) {
            misc.push(("R_dom", "R_dom must be finite and > 0".to_string()));
        }
        add("grid", misc);
        let mut top = Vec::new();
        if let Some(list) = &self.s_list {
            if list.is_empty() {
                top.push(("s_list", "s_list must not be empty".to_string()));
            } else if list.windows(2).any(|w| w[1] >= w[0]) {
                top.push(("s_list", "s_list must be strictly decreasing".to_string()));
            }
            let n = self.model.n_dim as f64;
            if list.iter().any(|&s| !(s > 0.0 && s * self.model.p < n)) {
                top.push(("s_list", "every s must satisfy 0 < s*p < N".to_string()));
            }
        }
        if let Some(h) = self.hstar {
            if !(h.is_finite() && h > 0.0) {
                top.push(("hstar", "hstar must be > 0".to_string()));
            }
        }
        if !(self.noise.is_finite() && (0.0..1.0).contains(&self.noise)) {
            top.push(("noise", "noise must lie in [0, 1)".to_string()));
        }
        out.extend(top.into_iter().map(|(name, message)| Violation {
            field: name.to_string(),
            message,
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// Malformed JSON, or JSON that does not fit the schema.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed config breaking one or more constraints.
    Invalid(Vec<Violation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax {
                line,
                column,
                message,
            } => write!(f, "config error at line {line}, column {column}: {message}"),
            ConfigError::Invalid(v) => {
                write!(f, "config has {} violation(s)", v.len())?;
                for x in v {
                    write!(f, "\n  {}: {}", x.field, x.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(v))
    }
}
