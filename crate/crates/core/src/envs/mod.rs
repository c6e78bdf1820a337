//! Environment abstraction and the three native environments.
//!
//! All environments follow the same reset/step contract: `reset` must be
//! given a seed the first time, `step` errors once the episode is over, and
//! identical seeds plus identical action sequences give bit-identical
//! trajectories.

pub mod bandit;
pub mod pendulum;
pub mod windygrid;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bandit::{BanditEnv, BanditSpec};
pub use pendulum::{Pendulum, PendulumParams};
pub use windygrid::{GridAction, WindyGrid, WindyGridParams};

/// Observation emitted to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObsVec(pub Vec<f64>);

impl Deref for ObsVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ObsVec {
    fn from(v: Vec<f64>) -> Self {
        ObsVec(v)
    }
}

/// Privileged full state, bypassing every observation wrapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(pub Vec<f64>);

impl Deref for StateVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActValue {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl fmt::Display for ActValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActValue::Discrete(i) => write!(f, "#{i}"),
            ActValue::Continuous(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }

    /// Check an action against the space. Continuous actions are clamped.
    pub fn validate(&self, action: &ActValue) -> Result<ActValue> {
        match (self, action) {
            (ActionSpace::Discrete(n), ActValue::Discrete(i)) if i < n => Ok(action.clone()),
            (ActionSpace::Continuous { low, high }, ActValue::Continuous(v)) if v.len() == low.len() => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("action"));
                }
                Ok(ActValue::Continuous(self.clamp(v)))
            }
            _ => Err(Error::InvalidAction(action.to_string())),
        }
    }

    pub fn clamp(&self, v: &[f64]) -> Vec<f64> {
        match self {
            ActionSpace::Continuous { low, high } => v
                .iter()
                .zip(low.iter().zip(high))
                .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
                .collect(),
            ActionSpace::Discrete(_) => v.to_vec(),
        }
    }

    /// The action a delay queue is primed with.
    pub fn zero_action(&self) -> ActValue {
        match self {
            ActionSpace::Discrete(_) => ActValue::Discrete(0),
            ActionSpace::Continuous { low, .. } => ActValue::Continuous(vec![0.0; low.len()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: ObsVec,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn horizon(&self) -> usize;
    /// `Some(seed)` reseeds; `None` continues the current stream and is an
    /// error on a never-seeded environment.
    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec>;
    fn step(&mut self, action: &ActValue) -> Result<StepResult>;
    fn full_state(&self) -> StateVec;
    fn set_param(&mut self, name: &str, value: f64) -> Result<()>;
    fn params(&self) -> BTreeMap<String, f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Pendulum,
    Windygrid,
    Bandit,
}

impl EnvName {
    pub fn parse(name: &str) -> Option<EnvName> {
        match name {
            "pendulum" => Some(EnvName::Pendulum),
            "windygrid" => Some(EnvName::Windygrid),
            "bandit" => Some(EnvName::Bandit),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvName::Pendulum => "pendulum",
            EnvName::Windygrid => "windygrid",
            EnvName::Bandit => "bandit",
        }
    }
}

/// Name plus parameter overrides; enough to rebuild any native environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: EnvName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl EnvConfig {
    pub fn new(name: EnvName) -> Self {
        EnvConfig { name, params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        let mut env: Box<dyn Environment> = match self.name {
            EnvName::Pendulum => Box::new(Pendulum::new(PendulumParams::default())?),
            EnvName::Windygrid => Box::new(WindyGrid::new(WindyGridParams::default())?),
            EnvName::Bandit => Box::new(BanditEnv::new(BanditSpec::confounded())),
        };
        for (k, v) in &self.params {
            env.set_param(k, *v)?;
        }
        Ok(env)
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Episode bookkeeping shared by the native environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    pub t: usize,
    pub done: bool,
    pub started: bool,
}

impl EpisodeClock {
    pub fn begin(&mut self) {
        self.t = 0;
        self.done = false;
        self.started = true;
    }

    pub fn check_can_step(&self) -> Result<()> {
        if !self.started {
            return Err(Error::Unseeded);
        }
        if self.done {
            return Err(Error::StepAfterDone);
        }
        Ok(())
    }

    /// Advance one step; returns true if the horizon is reached.
    pub fn tick(&mut self, horizon: usize) -> bool {
        self.t += 1;
        self.t >= horizon
    }
}
