//! Declarative experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use avgopt::chains::{ChainSpec, Conditioning};
use avgopt::optimize::{check_problem, Objective, StepSchedule};
use avgopt::StateBlock;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objectives: Option<Vec<Objective>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<StepSchedule>,
    /// Number of steps `T`.
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Initial state, one row per agent; defaults to a centred spread.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub audits: Audits,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default)]
    pub decay: DecaySettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<Success>,
    #[serde(default)]
    pub search: Search,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Audits {
    /// Run `verify_assumptions` before the experiment.
    #[serde(default)]
    pub assumptions: bool,
    /// Deterministic drift inequality at every step, at the oracle optimum.
    #[serde(default)]
    pub lyapunov: bool,
    /// Exponent for the scaled consensus-error audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_beta: Option<f64>,
    /// Cross-seed second moment of `d / α` (needs 30 seeds).
    #[serde(default)]
    pub second_moment: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    #[serde(default = "default_verify_horizon")]
    pub horizon: usize,
    #[serde(default = "default_verify_trials")]
    pub trials: usize,
    #[serde(default)]
    pub conditioning: Conditioning,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            horizon: default_verify_horizon(),
            trials: default_verify_trials(),
            conditioning: Conditioning::default(),
            resamples: default_resamples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySettings {
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_decay_trials")]
    pub trials: usize,
    /// Window pairs `[[τ1, t1], [τ2, t2]]` checked against the fitted bound.
    #[serde(default)]
    pub joint: Vec<[[usize; 2]; 2]>,
}

impl Default for DecaySettings {
    fn default() -> Self {
        Self {
            t_max: default_t_max(),
            trials: default_decay_trials(),
            joint: Vec::new(),
        }
    }
}

/// Convergence criterion for `optimize`; omitted means no pass/fail on
/// convergence.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Success {
    #[serde(default = "default_tol_x")]
    pub tol_x: f64,
    #[serde(default = "default_tol_f")]
    pub tol_f: f64,
    #[serde(default = "default_min_fraction")]
    pub min_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Search {
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

impl Default for Search {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            grid: default_grid(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn one() -> usize {
    1
}
fn default_verify_horizon() -> usize {
    200
}
fn default_verify_trials() -> usize {
    20
}
fn default_resamples() -> usize {
    200
}
fn default_t_max() -> usize {
    300
}
fn default_decay_trials() -> usize {
    200
}
fn default_tol_x() -> f64 {
    0.1
}
fn default_tol_f() -> f64 {
    0.2
}
fn default_min_fraction() -> f64 {
    0.9
}
fn default_half_width() -> f64 {
    100.0
}
fn default_grid() -> usize {
    2001
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.chain.validate().map_err(|e| e.to_string())?;
        if self.seeds.is_empty() {
            return Err("seed list is empty".into());
        }
        if self.record_every == 0 {
            return Err("record_every must be positive".into());
        }
        if let Some(s) = &self.success {
            if !(0.0..=1.0).contains(&s.min_fraction) || s.tol_x < 0.0 || s.tol_f < 0.0 {
                return Err("success tolerances must be nonnegative and min_fraction in [0, 1]".into());
            }
        }
        if let Some(x0) = &self.x0 {
            StateBlock::new(x0.clone()).map_err(|e| format!("x0: {e}"))?;
        }
        Ok(())
    }

    pub fn n(&self) -> Result<usize, String> {
        self.chain.n().map_err(|e| e.to_string())
    }

    /// The initial state for a problem of dimension `m`.
    pub fn initial_state(&self, m: usize) -> Result<StateBlock, String> {
        let n = self.n()?;
        let x0 = match &self.x0 {
            Some(rows) => StateBlock::new(rows.clone()).map_err(|e| format!("x0: {e}"))?,
            None => StateBlock::spread(n, m),
        };
        if x0.n() != n || x0.m() != m {
            return Err(format!("x0 must be {n} x {m}, got {} x {}", x0.n(), x0.m()));
        }
        Ok(x0)
    }

    /// Objectives, schedule and initial state for `optimize`.
    pub fn problem(&self) -> Result<(Vec<Objective>, StepSchedule, StateBlock), String> {
        let objectives = self.objectives.clone().ok_or("optimize needs \"objectives\"")?;
        let schedule = self.schedule.ok_or("optimize needs \"schedule\"")?;
        let m = objectives.first().map_or(1, Objective::dim);
        let x0 = self.initial_state(m)?;
        check_problem(&objectives, &x0).map_err(|e| e.to_string())?;
        Ok((objectives, schedule, x0))
    }

    pub fn apply_overrides(&mut self, trials: Option<usize>, seed_offset: u64) {
        if let Some(t) = trials {
            self.seeds = (0..t as u64).collect();
        }
        for s in &mut self.seeds {
            *s = s.wrapping_add(seed_offset);
        }
    }
}
