use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{BehaviorMode, Corruption, Dataset, DatasetMeta, Tier, TransitionRecord, FORMAT_VERSION};
use crate::agents::Actor;
use crate::envs::pendulum::normalize_angle;
use crate::envs::{ActValue, EnvName, Environment};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, STREAM_POLICY};

/// Roll `actor` in `env` for exactly `n_records` transitions.
///
/// In observed mode the actor sees the emitted observation; in privileged
/// mode it sees `full_state()`. Records always hold emitted observations.
pub fn collect_dataset(
    env: &mut dyn Environment,
    actor: &mut dyn Actor,
    n_records: usize,
    mode: BehaviorMode,
    seed: u64,
) -> Result<Dataset> {
    let records = collect(env, actor, n_records, mode, 1, seed)?;
    Dataset::new(meta_for(env, mode, seed), records)
}

/// Collection where the actor sees the last `k` observations concatenated
/// (oldest first, zero-padded at episode start) but records keep only the
/// current one.
pub fn collect_history_confounded(
    env: &mut dyn Environment,
    k: usize,
    actor: &mut dyn Actor,
    n_records: usize,
    seed: u64,
) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidParam("history length must be >= 1".into()));
    }
    let records = collect(env, actor, n_records, BehaviorMode::Observed, k, seed)?;
    let mut meta = meta_for(env, BehaviorMode::Observed, seed);
    if k > 1 {
        meta.behavior_mode = BehaviorMode::Privileged;
        meta.corruption.push(Corruption::HistoryConfounded { k });
    }
    Dataset::new(meta, records)
}

pub(super) fn meta_for(env: &dyn Environment, mode: BehaviorMode, seed: u64) -> DatasetMeta {
    DatasetMeta {
        format_version: FORMAT_VERSION.into(),
        env_name: EnvName::parse(env.name()).expect("native environment"),
        env_params: env.params(),
        env_perturbations: Vec::new(),
        tier: Tier::Random,
        corruption: Vec::new(),
        behavior_mode: mode,
        seed,
        obs_dim: env.obs_dim(),
        record_count: 0,
    }
}

fn collect(
    env: &mut dyn Environment,
    actor: &mut dyn Actor,
    n_records: usize,
    mode: BehaviorMode,
    k: usize,
    seed: u64,
) -> Result<Vec<TransitionRecord>> {
    if n_records == 0 {
        return Err(Error::EmptyDataset);
    }
    actor.reseed(derive_seed(seed, STREAM_POLICY));
    let mut records = Vec::with_capacity(n_records);
    let mut obs = env.reset(Some(seed))?;
    let input_of = |env: &dyn Environment, obs: &[f64]| match mode {
        BehaviorMode::Observed => obs.to_vec(),
        BehaviorMode::Privileged => env.full_state().0,
    };
    let first = input_of(env, &obs);
    let width = first.len();
    let mut window: VecDeque<Vec<f64>> = VecDeque::new();
    let restart = |window: &mut VecDeque<Vec<f64>>, input: Vec<f64>| {
        window.clear();
        for _ in 1..k {
            window.push_back(vec![0.0; width]);
        }
        window.push_back(input);
    };
    restart(&mut window, first);
    while records.len() < n_records {
        let flat: Vec<f64> = window.iter().flatten().copied().collect();
        let action = actor.act(&flat)?;
        let step = env.step(&action)?;
        records.push(TransitionRecord {
            obs: obs.clone(),
            action,
            reward: step.reward,
            next_obs: step.obs.clone(),
            done: step.done,
        });
        if step.done {
            obs = env.reset(None)?;
            let input = input_of(env, &obs);
            restart(&mut window, input);
        } else {
            obs = step.obs;
            let input = input_of(env, &obs);
            window.pop_front();
            window.push_back(input);
        }
    }
    Ok(records)
}

/// Pendulum swing-up that estimates angular velocity by finite differences
/// over its observation window instead of reading it. The window holds
/// `k` observations of `(cos, sin, omega)`.
#[derive(Debug, Clone)]
pub struct HistorySwingUp {
    pub k: usize,
    pub dt: f64,
    pub gravity: f64,
    pub grid: Vec<ActValue>,
    pub epsilon: f64,
    rng: ChaCha8Rng,
}

impl HistorySwingUp {
    pub fn new(k: usize, grid: Vec<ActValue>, epsilon: f64) -> Self {
        HistorySwingUp { k, dt: 0.05, gravity: 9.81, grid, epsilon, rng: rng_for(0, STREAM_POLICY) }
    }

    fn torque(&self, window: &[f64]) -> f64 {
        let obs = |i: usize| &window[i * 3..i * 3 + 3];
        let now = obs(self.k - 1);
        let theta = now[1].atan2(now[0]);
        let omega = if self.k >= 2 {
            let prev = obs(self.k - 2);
            if prev[0] == 0.0 && prev[1] == 0.0 {
                0.0
            } else {
                normalize_angle(theta - prev[1].atan2(prev[0])) / self.dt
            }
        } else {
            0.0
        };
        if theta.cos() > 0.95 {
            -(12.0 * theta + 2.0 * omega)
        } else {
            // energy relative to upright rest, unit mass and length
            let energy = 0.5 * omega * omega + self.gravity * (theta.cos() - 1.0);
            let dir = if omega == 0.0 { 1.0 } else { omega.signum() };
            if energy < 0.0 {
                2.0 * dir
            } else {
                -0.5 * dir
            }
        }
    }
}

impl Actor for HistorySwingUp {
    fn act(&mut self, input: &[f64]) -> Result<ActValue> {
        if input.len() != self.k * 3 {
            return Err(Error::InvalidParam(format!("expected a window of {} entries, got {}", self.k * 3, input.len())));
        }
        if self.epsilon > 0.0 && self.rng.random_bool(self.epsilon) {
            return Ok(self.grid[self.rng.random_range(0..self.grid.len())].clone());
        }
        let u = self.torque(input);
        Ok(self.grid[crate::agents::grid_index(&self.grid, &ActValue::Continuous(vec![u]))].clone())
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = rng_for(seed, STREAM_POLICY);
    }
}
