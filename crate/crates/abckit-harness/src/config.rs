//! Experiment configuration: defaults reproduce the published study, a TOML
//! file overrides the defaults, and CLI flags override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(String),
    #[error("cannot parse config file: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Normal,
    ExponentialRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Ball,
    Ellipse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Normal: `[mu0, kappa, alpha, beta]`; exponential rate: `[alpha, beta]`.
    pub prior: Vec<f64>,
    /// Normal: `[mu, sigma2]`; exponential rate: `[theta]`.
    pub true_theta: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub sample_sizes: Vec<u64>,
    /// Explicit cell list; when absent the tolerance-by-size grid is used.
    pub cells: Option<Vec<(f64, u64)>>,
    pub particles: usize,
    pub master_seed: u64,
    pub geometries: Vec<GeometryKind>,
    pub output_dir: PathBuf,
    /// Proposal budget per (cell, geometry) run.
    pub max_proposals: u64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Normal,
            prior: vec![0.0, 1.0, 1.0, 1.0],
            true_theta: vec![0.0, 1.0],
            tolerances: vec![0.05, 0.25, 0.5, 1.0],
            sample_sizes: vec![100, 300, 600, 1000],
            cells: None,
            particles: 1000,
            master_seed: 20160309,
            geometries: vec![GeometryKind::Ball, GeometryKind::Ellipse],
            output_dir: PathBuf::from("out"),
            max_proposals: 1_000_000_000,
            workers: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        let config: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// The cells to run, in declaration order.
    pub fn cell_list(&self) -> Vec<(f64, u64)> {
        match &self.cells {
            Some(cells) => cells.clone(),
            None => self
                .tolerances
                .iter()
                .flat_map(|tol| self.sample_sizes.iter().map(move |n| (*tol, *n)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.into()));
        if self.particles == 0 {
            return invalid("particles must be at least 1");
        }
        if self.max_proposals < self.particles as u64 {
            return invalid("max_proposals must cover the particle count");
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1");
        }
        if self.geometries.is_empty() {
            return invalid("at least one geometry is required");
        }
        let cells = self.cell_list();
        if cells.is_empty() {
            return invalid("no cells to run");
        }
        if cells.iter().any(|(tol, _)| !(*tol > 0.0)) {
            return invalid("tolerances must be positive");
        }
        match self.model {
            ModelKind::Normal => {
                if self.prior.len() != 4 {
                    return invalid("normal prior needs [mu0, kappa, alpha, beta]");
                }
                if self.true_theta.len() != 2 || !(self.true_theta[1] > 0.0) {
                    return invalid("normal true_theta needs [mu, sigma2] with sigma2 > 0");
                }
                if cells.iter().any(|(_, n)| *n < 2) {
                    return invalid("normal-model cells need n >= 2");
                }
            }
            ModelKind::ExponentialRate => {
                if self.prior.len() != 2 {
                    return invalid("exponential prior needs [alpha, beta]");
                }
                if self.true_theta.len() != 1 || !(self.true_theta[0] > 0.0) {
                    return invalid("exponential true_theta needs [theta] with theta > 0");
                }
                if cells.iter().any(|(_, n)| *n < 1) {
                    return invalid("exponential-model cells need n >= 1");
                }
            }
        }
        Ok(())
    }
}
