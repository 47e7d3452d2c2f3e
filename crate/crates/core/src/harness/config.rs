//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linsolve::SolverOptions;
use crate::model::{double_well, InitialData, Problem, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ConvergeSpace,
    ConvergeTime,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Droplet,
    Random,
    Sine,
    /// Spatially constant initial value; `u ≡ ±1` is a pure phase.
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "quarter")]
    pub potential_scale: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { eps: 1.0, delta: 1.0, kappa: 1.0, potential_scale: 0.25 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    /// Cells per side of the unit-square mesh.
    #[serde(default = "default_square_n")]
    pub square_n: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub constant: f64,
    #[serde(default = "default_droplet_center")]
    pub droplet_center: [f64; 2],
    #[serde(default = "default_droplet_axes")]
    pub droplet_semi_axes: [f64; 2],
    /// Steps at which VTK snapshots are written.
    #[serde(default)]
    pub snapshot_steps: Vec<usize>,
    /// Mass and energy are recorded every this many steps.
    #[serde(default = "default_every")]
    pub series_every: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_direct_max")]
    pub direct_max_unknowns: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rel_tol: default_rel_tol(), direct_max_unknowns: default_direct_max() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub q: usize,
    #[serde(default)]
    pub tau: Vec<f64>,
    /// Disk refinement levels for the convergence experiments.
    #[serde(default)]
    pub levels: Vec<usize>,
    pub t_end: f64,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn quarter() -> f64 {
    0.25
}
fn default_square_n() -> usize {
    54
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_droplet_center() -> [f64; 2] {
    [0.1, 0.5]
}
fn default_droplet_axes() -> [f64; 2] {
    [0.3407, 0.1835]
}
fn default_every() -> usize {
    1
}
fn default_rel_tol() -> f64 {
    1e-12
}
fn default_direct_max() -> usize {
    SolverOptions::default().direct_max_unknowns
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn check(&self) -> Result<()> {
        if !(1..=5).contains(&self.q) {
            return Err(Error::Config(format!("q must be in 1..=5, got {}", self.q)));
        }
        if self.tau.is_empty() || self.tau.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("tau must be a non-empty list of positive step sizes".into()));
        }
        match self.experiment {
            Experiment::ConvergeSpace | Experiment::ConvergeTime => {
                if self.levels.is_empty() {
                    return Err(Error::Config("convergence experiments need a non-empty `levels` list".into()));
                }
            }
            Experiment::Simulate => {
                if self.simulate.is_none() {
                    return Err(Error::Config("simulate experiments need a [simulate] section".into()));
                }
            }
        }
        let max_tau = self.tau.iter().cloned().fold(0.0, f64::max);
        if self.t_end < self.q as f64 * max_tau * (1.0 - 1e-12) {
            return Err(Error::Config(format!("t_end = {} is shorter than q·max(tau)", self.t_end)));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rel_tol: self.solver.rel_tol,
            direct_max_unknowns: self.solver.direct_max_unknowns,
            ..SolverOptions::default()
        }
    }

    /// Interface parameters and double-well potentials (no sources).
    pub fn problem(&self) -> Result<Problem> {
        let p = &self.problem;
        let w = double_well(p.potential_scale)?;
        Problem::new(p.eps, p.delta, p.kappa, w.clone(), w)
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        let s = self.simulate.as_ref().ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
        Ok(match s.scenario {
            Scenario::Droplet => InitialData::Droplet { center: s.droplet_center, semi_axes: s.droplet_semi_axes },
            Scenario::Random => InitialData::UniformRandom { amplitude: s.amplitude, seed: s.seed },
            Scenario::Sine => InitialData::SineProduct,
            Scenario::Constant => InitialData::Custom(ScalarField::constant(s.constant)),
        })
    }
}
