//! Sim2real error injection: composable wrappers around any [`Environment`].
//!
//! Every wrapper is the identity when its parameter is neutral (empty map,
//! zero sigma, zero delay, no indices), down to the bit. Noise wrappers own
//! their own random streams, derived from the reset seed, so changing a
//! noise level never changes the underlying dynamics draws.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envs::{ActValue, ActionSpace, EnvConfig, Environment, ObsVec, StateVec, StepResult};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_ACTION_NOISE, STREAM_OBS_NOISE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbSpec {
    TransitionParamOverride { overrides: BTreeMap<String, f64> },
    ObsNoise { sigma: f64 },
    HiddenDims { indices: Vec<usize> },
    ActionNoise { sigma: f64 },
    ActionDelay { steps: usize },
}

impl PerturbSpec {
    /// Position in the canonical wrapping order (innermost first).
    fn rank(&self) -> u8 {
        match self {
            PerturbSpec::TransitionParamOverride { .. } => 0,
            PerturbSpec::ActionDelay { .. } => 1,
            PerturbSpec::ActionNoise { .. } => 2,
            PerturbSpec::ObsNoise { .. } => 3,
            PerturbSpec::HiddenDims { .. } => 4,
        }
    }
}

/// Wrap `env` with every perturbation. Application order is canonical, not
/// list order: parameter overrides, delay, action noise, observation noise,
/// then hidden dims, so hidden entries stay exactly zero under noise.
pub fn apply_perturbations(mut env: Box<dyn Environment>, specs: &[PerturbSpec]) -> Result<Box<dyn Environment>> {
    let mut ordered: Vec<&PerturbSpec> = specs.iter().collect();
    ordered.sort_by_key(|s| s.rank());
    for spec in ordered {
        env = match spec {
            PerturbSpec::TransitionParamOverride { overrides } => with_transition_error(env, overrides)?,
            PerturbSpec::ObsNoise { sigma } => with_obs_noise(env, *sigma)?,
            PerturbSpec::HiddenDims { indices } => with_hidden_dims(env, indices)?,
            PerturbSpec::ActionNoise { sigma } => with_action_noise(env, *sigma)?,
            PerturbSpec::ActionDelay { steps } => with_action_delay(env, *steps)?,
        };
    }
    Ok(env)
}

/// An environment config plus the sim2real perturbations wrapped around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub env: EnvConfig,
    #[serde(default)]
    pub perturbations: Vec<PerturbSpec>,
}

impl EnvSpec {
    pub fn new(env: EnvConfig) -> Self {
        EnvSpec { env, perturbations: Vec::new() }
    }

    pub fn with(mut self, p: PerturbSpec) -> Self {
        self.perturbations.push(p);
        self
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        apply_perturbations(self.env.build()?, &self.perturbations)
    }

    /// The unperturbed environment.
    pub fn truth(&self) -> EnvSpec {
        EnvSpec::new(self.env.clone())
    }
}

/// Observation indices hidden by a perturbation list.
pub fn hidden_indices(specs: &[PerturbSpec]) -> Vec<usize> {
    let mut set = BTreeSet::new();
    for s in specs {
        if let PerturbSpec::HiddenDims { indices } = s {
            set.extend(indices.iter().copied());
        }
    }
    set.into_iter().collect()
}

pub fn with_transition_error(
    mut env: Box<dyn Environment>,
    overrides: &BTreeMap<String, f64>,
) -> Result<Box<dyn Environment>> {
    for (name, value) in overrides {
        env.set_param(name, *value)?;
    }
    Ok(env)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("noise sigma must be >= 0, got {sigma}")))
    }
}

pub fn with_obs_noise(env: Box<dyn Environment>, sigma: f64) -> Result<Box<dyn Environment>> {
    check_sigma(sigma)?;
    Ok(Box::new(ObsNoise { inner: env, sigma, rng: None }))
}

pub fn with_hidden_dims(env: Box<dyn Environment>, indices: &[usize]) -> Result<Box<dyn Environment>> {
    let dim = env.obs_dim();
    if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange { index: bad, dim });
    }
    Ok(Box::new(HiddenDims { inner: env, indices: indices.to_vec() }))
}

pub fn with_action_noise(env: Box<dyn Environment>, sigma: f64) -> Result<Box<dyn Environment>> {
    check_sigma(sigma)?;
    Ok(Box::new(ActionNoise::new(env, sigma)?))
}

pub fn with_action_delay(env: Box<dyn Environment>, steps: usize) -> Result<Box<dyn Environment>> {
    Ok(Box::new(ActionDelay { inner: env, steps, queue: VecDeque::new() }))
}

macro_rules! delegate_common {
    () => {
        fn name(&self) -> &'static str {
            self.inner.name()
        }
        fn obs_dim(&self) -> usize {
            self.inner.obs_dim()
        }
        fn action_space(&self) -> ActionSpace {
            self.inner.action_space()
        }
        fn horizon(&self) -> usize {
            self.inner.horizon()
        }
        fn full_state(&self) -> StateVec {
            self.inner.full_state()
        }
        fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
            self.inner.set_param(name, value)
        }
        fn params(&self) -> BTreeMap<String, f64> {
            self.inner.params()
        }
    };
}

pub struct ObsNoise {
    inner: Box<dyn Environment>,
    sigma: f64,
    rng: Option<ChaCha8Rng>,
}

impl ObsNoise {
    fn noisy(&mut self, mut obs: ObsVec) -> Result<ObsVec> {
        if self.sigma == 0.0 {
            return Ok(obs);
        }
        let rng = self.rng.as_mut().ok_or(Error::Unseeded)?;
        for v in obs.0.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += self.sigma * z;
        }
        Ok(obs)
    }
}

impl Environment for ObsNoise {
    delegate_common!();

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        let obs = self.inner.reset(seed)?;
        if let Some(s) = seed {
            self.rng = Some(rng_for(s, STREAM_OBS_NOISE));
        }
        self.noisy(obs)
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        let mut r = self.inner.step(action)?;
        r.obs = self.noisy(r.obs)?;
        Ok(r)
    }
}

pub struct HiddenDims {
    inner: Box<dyn Environment>,
    indices: Vec<usize>,
}

impl HiddenDims {
    fn zero(&self, mut obs: ObsVec) -> ObsVec {
        for &i in &self.indices {
            obs.0[i] = 0.0;
        }
        obs
    }
}

impl Environment for HiddenDims {
    delegate_common!();

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        let obs = self.inner.reset(seed)?;
        Ok(self.zero(obs))
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        let mut r = self.inner.step(action)?;
        r.obs = self.zero(r.obs);
        Ok(r)
    }
}

pub struct ActionNoise {
    inner: Box<dyn Environment>,
    sigma: f64,
    rng: Option<ChaCha8Rng>,
    last_executed: Option<ActValue>,
}

impl ActionNoise {
    pub fn new(inner: Box<dyn Environment>, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if inner.action_space().is_discrete() {
            return Err(Error::NotApplicable("action noise needs a continuous action space".into()));
        }
        Ok(ActionNoise { inner, sigma, rng: None, last_executed: None })
    }

    /// The action actually sent to the wrapped environment on the last step.
    pub fn last_executed(&self) -> Option<&ActValue> {
        self.last_executed.as_ref()
    }
}

impl Environment for ActionNoise {
    delegate_common!();

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        let obs = self.inner.reset(seed)?;
        if let Some(s) = seed {
            self.rng = Some(rng_for(s, STREAM_ACTION_NOISE));
        }
        Ok(obs)
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        let executed = match action {
            ActValue::Continuous(v) if self.sigma > 0.0 => {
                let rng = self.rng.as_mut().ok_or(Error::Unseeded)?;
                let noisy: Vec<f64> = v
                    .iter()
                    .map(|x| {
                        let z: f64 = rng.sample(StandardNormal);
                        x + self.sigma * z
                    })
                    .collect();
                ActValue::Continuous(self.inner.action_space().clamp(&noisy))
            }
            _ => action.clone(),
        };
        let r = self.inner.step(&executed)?;
        self.last_executed = Some(executed);
        Ok(r)
    }
}

pub struct ActionDelay {
    inner: Box<dyn Environment>,
    steps: usize,
    queue: VecDeque<ActValue>,
}

impl Environment for ActionDelay {
    delegate_common!();

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        let obs = self.inner.reset(seed)?;
        let zero = self.inner.action_space().zero_action();
        self.queue = std::iter::repeat_n(zero, self.steps).collect();
        Ok(obs)
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        self.inner.action_space().validate(action)?;
        self.queue.push_back(action.clone());
        let executed = self.queue.pop_front().expect("queue holds at least the new action");
        self.inner.step(&executed)
    }
}
