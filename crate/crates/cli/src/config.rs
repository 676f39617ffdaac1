//! Run configuration: one flat TOML table, every key optional.
//!
//! ```toml
//! case = 1
//! catalog = "motors.csv"    # relative to this file; built-in table if absent
//! seed = 0
//! epsilon_deg = 1.29
//! out = "results"
//! workers = 1
//! runs = 100
//! sample_dt = 0.001
//!
//! rel_tol = 1e-6
//! abs_tol = 1e-9
//! max_cycles = 25
//! t_max = 20.0
//! event_tol = 1e-10
//! stance_time_limit = 2.0
//!
//! population = 128
//! max_iterations = 100
//! stall_infeasible = 15
//! stall_feasible = 5
//! inertia = 0.729
//! cognitive = 1.49445
//! social = 1.49445
//! max_velocity = 0.5
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tdslip::catalog::{load_catalog, Catalog};
use tdslip::eval::{CaseStudy, NoiseSpec, DEFAULT_EPSILON};
use tdslip::mdpso::SwarmConfig;
use tdslip::sim::SimConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: u8,
    pub catalog: Option<PathBuf>,
    pub seed: u64,
    pub epsilon_deg: f64,
    pub out: PathBuf,
    pub workers: usize,
    pub runs: usize,
    pub sample_dt: f64,

    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_cycles: usize,
    pub t_max: f64,
    pub event_tol: f64,
    pub stance_time_limit: f64,

    pub population: usize,
    pub max_iterations: usize,
    pub stall_infeasible: usize,
    pub stall_feasible: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub max_velocity: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        let swarm = SwarmConfig::default();
        Self {
            case: 1,
            catalog: None,
            seed: 0,
            epsilon_deg: DEFAULT_EPSILON.to_degrees(),
            out: PathBuf::from("results"),
            workers: 1,
            runs: 100,
            sample_dt: 1e-3,
            rel_tol: sim.rel_tol,
            abs_tol: sim.abs_tol,
            max_cycles: sim.max_cycles,
            t_max: sim.t_max,
            event_tol: sim.event_tol,
            stance_time_limit: sim.stance_time_limit,
            population: swarm.population,
            max_iterations: swarm.max_iterations,
            stall_infeasible: swarm.stall_infeasible,
            stall_feasible: swarm.stall_feasible,
            inertia: swarm.inertia,
            cognitive: swarm.cognitive,
            social: swarm.social,
            max_velocity: swarm.max_velocity,
        }
    }
}

impl RunConfig {
    /// Reads a config file; a relative `catalog` path is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(cat), Some(dir)) = (&cfg.catalog, path.parent()) {
            if cat.is_relative() {
                cfg.catalog = Some(dir.join(cat));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.case_study()?;
        if !(self.epsilon_deg.is_finite() && self.epsilon_deg >= 0.0) {
            return Err(CliError::Config("epsilon_deg must be non-negative".into()));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(CliError::Config("sample_dt must be positive".into()));
        }
        if self.runs == 0 {
            return Err(CliError::Config("runs must be at least 1".into()));
        }
        self.sim().validate().map_err(CliError::config)?;
        self.swarm().validate().map_err(CliError::config)?;
        if let Some(path) = &self.catalog {
            if !path.is_file() {
                return Err(CliError::Config(format!("catalog {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn case_study(&self) -> Result<CaseStudy, CliError> {
        CaseStudy::try_from(self.case).map_err(CliError::config)
    }

    pub fn catalog(&self) -> Result<Catalog, CliError> {
        match &self.catalog {
            Some(path) => load_catalog(path).map_err(CliError::config),
            None => Ok(Catalog::builtin()),
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_cycles: self.max_cycles,
            t_max: self.t_max,
            event_tol: self.event_tol,
            stance_time_limit: self.stance_time_limit,
            dense_segments: usize::MAX,
        }
    }

    pub fn swarm(&self) -> SwarmConfig {
        SwarmConfig {
            population: self.population,
            max_iterations: self.max_iterations,
            stall_infeasible: self.stall_infeasible,
            stall_feasible: self.stall_feasible,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
            max_velocity: self.max_velocity,
            seed: self.seed,
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            epsilon: self.epsilon_deg.to_radians(),
            seed: self.seed,
        }
    }
}
