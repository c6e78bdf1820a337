//! Reference agents over a discretized action grid: online fitted-Q,
//! behavior-constrained offline fitted-Q, a direct-model MOPO analog, and
//! the simulator-anchored hybrid (HyMOPO).

mod eval;
mod fqi;
mod model_based;
mod offline;
mod online;
mod policy;

use serde::{Deserialize, Serialize};

pub use eval::{evaluate_policy, evaluate_spec, mean_std, policy_table};
pub use fqi::{fitted_q, BehaviorModel, FqBatch, QFunction};
pub use model_based::{train_hymopo, train_mopo_lite, ModelBasedRun, RolloutTrace};
pub use offline::{train_offline_bcq, train_offline_fq};
pub use online::{train_online_q, Checkpoint, OnlineRun};
pub use policy::{Actor, Policy, PolicyKind, POLICY_FORMAT};

use crate::datagen::DatasetMeta;
use crate::dynmodel::{ModelConfig, PenaltyMode};
use crate::envs::windygrid::WindyGridParams;
use crate::envs::{ActValue, EnvConfig, EnvName};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, TileDim};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Torque levels on a continuous action axis.
    pub action_bins: usize,
    /// Discount; `None` uses the environment's default.
    pub gamma: Option<f64>,
    /// Q-function features over the observation; `None` uses the environment's default.
    pub q_features: Option<FeatureKind>,
    pub fq_iterations: usize,
    pub ridge: f64,

    /// Online schedule; `None` fields use the environment's default.
    pub online_steps: Option<usize>,
    pub sweep_every: Option<usize>,
    pub sweep_iterations: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: Option<usize>,
    pub curve_episodes: usize,

    /// Minimum behavior probability for an action to be eligible offline.
    pub bc_threshold: f64,

    /// Dynamics model; `None` uses the environment's default.
    pub model: Option<ModelConfig>,
    pub lambda: f64,
    pub horizon: usize,
    pub rollout_batch: usize,
    pub epochs: usize,
    /// Share of total sample weight given to model rollouts when both sources are present.
    pub model_fraction: f64,
    pub penalty: PenaltyMode,
    pub rollout_epsilon: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            action_bins: 9,
            gamma: None,
            q_features: None,
            fq_iterations: 200,
            ridge: 1e-3,
            online_steps: None,
            sweep_every: None,
            sweep_iterations: 40,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: None,
            curve_episodes: 5,
            bc_threshold: 0.1,
            model: None,
            lambda: 0.0,
            horizon: 5,
            rollout_batch: 64,
            epochs: 10,
            model_fraction: 0.5,
            penalty: PenaltyMode::Disagreement,
            rollout_epsilon: 0.1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("action_bins", self.action_bins),
            ("fq_iterations", self.fq_iterations),
            ("online_steps", self.online_steps.unwrap_or(1)),
            ("sweep_every", self.sweep_every.unwrap_or(1)),
            ("sweep_iterations", self.sweep_iterations),
            ("curve_episodes", self.curve_episodes),
            ("rollout_batch", self.rollout_batch),
            ("epochs", self.epochs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParam(format!("{name} must be >= 1")));
            }
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::InvalidParam(format!("gamma must lie in [0, 1), got {g}")));
            }
        }
        for (name, v) in [
            ("bc_threshold", self.bc_threshold),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("rollout_epsilon", self.rollout_epsilon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.model_fraction) {
            return Err(Error::InvalidParam(format!("model_fraction must lie in [0, 1), got {}", self.model_fraction)));
        }
        if !(self.ridge >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParam("ridge must be >= 0 and lambda finite".into()));
        }
        Ok(())
    }
}

/// Per-environment choices the agents fall back on.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvDefaults {
    pub obs_dim: usize,
    pub action_grid: Vec<ActValue>,
    pub gamma: f64,
    pub q_features: FeatureKind,
    pub model: ModelConfig,
    pub termination: Termination,
    pub schedule: OnlineSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnlineSchedule {
    pub steps: usize,
    pub sweep_every: usize,
    pub epsilon_decay_steps: usize,
}

/// Which transitions end an episode for value targets. Time-limit ends are
/// not terminal: the value past them is bootstrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Never,
    /// Arriving at this `(x, y)` cell.
    Goal(f64, f64),
}

impl Termination {
    pub fn is_terminal(&self, next_obs: &[f64]) -> bool {
        match *self {
            Termination::Never => false,
            Termination::Goal(x, y) => next_obs[0].round() == x && next_obs[1].round() == y,
        }
    }
}

pub fn env_defaults(env: &EnvConfig, action_bins: usize) -> Result<EnvDefaults> {
    match env.name {
        EnvName::Pendulum => {
            let limit = env.params.get("torque_limit").copied().unwrap_or(2.0);
            let grid = if action_bins == 1 {
                vec![ActValue::Continuous(vec![0.0])]
            } else {
                (0..action_bins)
                    .map(|i| ActValue::Continuous(vec![-limit + 2.0 * limit * i as f64 / (action_bins - 1) as f64]))
                    .collect()
            };
            Ok(EnvDefaults {
                obs_dim: 3,
                action_grid: grid,
                gamma: 0.99,
                q_features: FeatureKind::Tile {
                    dims: vec![
                        TileDim::Angle { cos_index: 0, sin_index: 1, bins: 41 },
                        TileDim::Linear { index: 2, low: -8.0, high: 8.0, bins: 41 },
                    ],
                },
                model: ModelConfig::default(),
                termination: Termination::Never,
                schedule: OnlineSchedule { steps: 120_000, sweep_every: 1_000, epsilon_decay_steps: 60_000 },
            })
        }
        EnvName::Windygrid => {
            let mut p = WindyGridParams::default();
            for (k, v) in &env.params {
                p.set(k, *v)?;
            }
            let lin = |index: usize, n: usize| TileDim::Linear { index, low: -0.5, high: n as f64 - 0.5, bins: n };
            Ok(EnvDefaults {
                obs_dim: 3,
                action_grid: (0..4).map(ActValue::Discrete).collect(),
                gamma: p.discount,
                q_features: FeatureKind::Tile { dims: vec![lin(0, p.width), lin(1, p.height), lin(2, 2)] },
                model: ModelConfig {
                    features: FeatureKind::Tile { dims: vec![lin(0, p.width), lin(1, p.height), lin(2, 2), lin(3, 4)] },
                    ..ModelConfig::default()
                },
                termination: Termination::Goal(p.goal.0 as f64, p.goal.1 as f64),
                schedule: OnlineSchedule { steps: 3_000, sweep_every: 25, epsilon_decay_steps: 1_500 },
            })
        }
        EnvName::Bandit => Err(Error::NotApplicable("agents act on stateful environments; use the oracle for the bandit".into())),
    }
}

/// Resolved settings for one training run.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub grid: Vec<ActValue>,
    pub gamma: f64,
    pub q_features: FeatureKind,
    pub model: ModelConfig,
    pub obs_dim: usize,
    pub termination: Termination,
    pub schedule: OnlineSchedule,
}

pub(crate) fn resolve(env: &EnvConfig, cfg: &AgentConfig) -> Result<Resolved> {
    cfg.validate()?;
    let d = env_defaults(env, cfg.action_bins)?;
    Ok(Resolved {
        grid: d.action_grid,
        gamma: cfg.gamma.unwrap_or(d.gamma),
        q_features: cfg.q_features.clone().unwrap_or(d.q_features),
        model: cfg.model.clone().unwrap_or(d.model),
        obs_dim: d.obs_dim,
        termination: d.termination,
        schedule: OnlineSchedule {
            steps: cfg.online_steps.unwrap_or(d.schedule.steps),
            sweep_every: cfg.sweep_every.unwrap_or(d.schedule.sweep_every),
            epsilon_decay_steps: cfg.epsilon_decay_steps.unwrap_or(d.schedule.epsilon_decay_steps),
        },
    })
}

pub(crate) fn env_of(meta: &DatasetMeta) -> EnvConfig {
    EnvConfig { name: meta.env_name, params: meta.env_params.clone() }
}

/// Index of the grid action closest to `action`.
pub fn grid_index(grid: &[ActValue], action: &ActValue) -> usize {
    let dist = |g: &ActValue| -> f64 {
        match (g, action) {
            (ActValue::Discrete(a), ActValue::Discrete(b)) => {
                if a == b {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (ActValue::Continuous(a), ActValue::Continuous(b)) => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            _ => f64::INFINITY,
        }
    };
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, g) in grid.iter().enumerate() {
        let d = dist(g);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
