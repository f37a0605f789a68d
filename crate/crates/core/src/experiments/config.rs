//! Flat key-value experiment configuration (TOML) with CLI overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{alias_free_grid, step_count, ModelParams, Scheme};
use crate::measures::MeasureSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Pushforward,
    Moments,
    Tails,
    Convergence,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pushforward => "pushforward",
            Self::Moments => "moments",
            Self::Tails => "tails",
            Self::Convergence => "convergence",
            Self::Validate => "validate",
        }
    }

    /// Whether the run evaluates transported weights over `[0, t]`.
    fn needs_weights(self) -> bool {
        matches!(self, Self::Pushforward | Self::Moments | Self::Validate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub alpha: f64,
    pub beta: f64,
    #[serde(alias = "N")]
    pub max_mode: usize,
    pub t: f64,
    pub step: f64,
    /// `L²` cutoff `R` of the initial law.
    #[serde(alias = "R")]
    pub radius: f64,
    pub n_samples: usize,
    pub p_moment: f64,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Besov regularity `s` for the tail study.
    pub besov_s: f64,
    /// Besov integrability `p` for the tail study.
    pub besov_p: f64,
    /// `L²` bound `B` in the tail event.
    #[serde(alias = "B")]
    pub l2_bound: f64,
    /// Restricts the initial law to the single mode `k` (moment probe).
    pub degenerate_mode: Option<i64>,
    /// Overrides the cubic-product grid; values below `4N+2` are only
    /// accepted by `validate`, whose dealiasing check must then fail.
    pub grid_size: Option<usize>,
    pub scheme: Scheme,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Validate,
            alpha: 0.8,
            beta: 0.5,
            max_mode: 8,
            t: 0.5,
            step: 1e-3,
            radius: 2.0,
            n_samples: 1000,
            p_moment: 2.0,
            lambda_grid: (0..=12).map(|i| 0.25 * i as f64).collect(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            besov_s: 0.2,
            besov_p: 2.0,
            l2_bound: 1.0,
            degenerate_mode: None,
            grid_size: None,
            scheme: Scheme::default(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.experiment.name(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("t", self.t),
            ("step", self.step),
            ("radius", self.radius),
            ("p_moment", self.p_moment),
            ("besov_s", self.besov_s),
            ("besov_p", self.besov_p),
            ("l2_bound", self.l2_bound),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(config_error(format!("{name} must be finite, got {v}")));
            }
        }
        if self.lambda_grid.iter().any(|v| !v.is_finite()) {
            return Err(config_error("lambda_grid entries must be finite"));
        }
        if self.n_samples < 1 {
            return Err(config_error("n_samples must be at least 1"));
        }
        if self.alpha <= 0.5 {
            return Err(config_error(format!("alpha must exceed 1/2, got {}", self.alpha)));
        }
        if self.radius <= 0.0 {
            return Err(config_error(format!("radius R must be positive, got {}", self.radius)));
        }
        if self.max_mode < 1 {
            return Err(config_error("max_mode N must be at least 1"));
        }
        if self.step <= 0.0 {
            return Err(config_error(format!("step must be positive, got {}", self.step)));
        }
        if self.t < 0.0 {
            return Err(config_error(format!("t must be non-negative, got {}", self.t)));
        }
        let steps = step_count(self.t, self.step).map_err(|e| config_error(e.to_string()))?;
        if self.experiment.needs_weights() && steps % 2 != 0 {
            return Err(config_error(format!(
                "step {} must divide t={} into an even number of steps",
                self.step, self.t
            )));
        }
        if let Some(grid) = self.grid_size {
            let required = alias_free_grid(self.max_mode);
            if grid < 2 * self.max_mode + 1 {
                return Err(config_error(format!(
                    "grid_size {grid} cannot resolve {} modes",
                    2 * self.max_mode + 1
                )));
            }
            if grid < required && self.experiment != ExperimentKind::Validate {
                return Err(config_error(format!(
                    "grid_size {grid} is below the alias-free size {required} for N={}",
                    self.max_mode
                )));
            }
        }
        if let Some(k) = self.degenerate_mode {
            if k.unsigned_abs() as usize > self.max_mode {
                return Err(config_error(format!(
                    "degenerate_mode {k} lies outside |k| <= {}",
                    self.max_mode
                )));
            }
        }
        match self.experiment {
            ExperimentKind::Moments if self.p_moment <= 1.0 => {
                Err(config_error(format!("p_moment must exceed 1, got {}", self.p_moment)))
            }
            ExperimentKind::Tails => self.validate_tails(),
            _ => Ok(()),
        }
    }

    fn validate_tails(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(config_error("lambda_grid must not be empty"));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) || self.lambda_grid[0] < 0.0 {
            return Err(config_error("lambda_grid must be non-negative and strictly ascending"));
        }
        if self.besov_p < 1.0 {
            return Err(config_error(format!(
                "besov_p must be at least 1, got {}",
                self.besov_p
            )));
        }
        if self.alpha - 1.0 + 1.0 / self.besov_p <= self.besov_s {
            return Err(config_error(format!(
                "tail study needs alpha - 1 + 1/p > s, got alpha={}, p={}, s={}",
                self.alpha, self.besov_p, self.besov_s
            )));
        }
        if self.l2_bound <= 0.0 {
            return Err(config_error(format!(
                "l2_bound B must be positive, got {}",
                self.l2_bound
            )));
        }
        Ok(())
    }

    /// Model parameters; the grid override is applied only when alias-free.
    pub fn model_params(&self) -> ModelParams {
        let mut params = ModelParams::new(self.beta, self.max_mode, self.step).with_scheme(self.scheme);
        if let Some(grid) = self.grid_size {
            params.grid_size = grid;
        }
        params
    }

    pub fn measure_spec(&self) -> MeasureSpec {
        MeasureSpec {
            alpha: self.alpha,
            max_mode: self.max_mode,
            radius: self.radius,
            seed: self.seed,
        }
    }
}
