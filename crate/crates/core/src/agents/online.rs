use rand::Rng;

use super::eval::evaluate_spec;
use super::fqi::{argmax_allowed, fitted_q, FqBatch, QFunction};
use super::policy::Policy;
use super::{resolve, AgentConfig};
use crate::datagen::TransitionRecord;
use crate::error::Result;
use crate::features::FeatureMap;
use crate::perturb::{hidden_indices, EnvSpec};
use crate::seed::{derive_seed, rng_for, STREAM_EVAL, STREAM_POLICY};

#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Environment steps taken when the checkpoint was cut.
    pub step: usize,
    /// Greedy return averaged over the curve episodes on the training environment.
    pub curve_return: f64,
    pub q: QFunction,
}

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub policy: Policy,
    pub checkpoints: Vec<Checkpoint>,
    /// Every transition seen, in order.
    pub buffer: Vec<TransitionRecord>,
}

impl OnlineRun {
    pub fn policy_at(&self, checkpoint: usize) -> Policy {
        Policy::greedy(self.checkpoints[checkpoint].q.clone(), self.policy.action_grid.clone())
            .with_mask(self.policy.obs_mask.clone())
    }
}

/// Epsilon-greedy interaction with a replay buffer and a fitted-Q sweep
/// (warm-started) every `sweep_every` steps.
pub fn train_online_q(spec: &EnvSpec, cfg: &AgentConfig, seed: u64) -> Result<OnlineRun> {
    let r = resolve(&spec.env, cfg)?;
    let features = FeatureMap::new(r.q_features.clone(), r.obs_dim)?;
    let mut q = QFunction::zeros(features.clone(), r.grid.len(), r.gamma)?;
    let mut env = spec.build()?;
    let mut rng = rng_for(seed, STREAM_POLICY);
    let mut batch = FqBatch::default();
    let sched = r.schedule;
    let mut buffer = Vec::with_capacity(sched.steps);
    let mut checkpoints = Vec::new();
    let mut obs = env.reset(Some(seed))?;
    for t in 0..sched.steps {
        let frac = (t as f64 / sched.epsilon_decay_steps.max(1) as f64).min(1.0);
        let eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
        let a = if rng.random_bool(eps) {
            rng.random_range(0..r.grid.len())
        } else {
            argmax_allowed(&q.values(&obs), None)
        };
        let step = env.step(&r.grid[a])?;
        batch.push(&features, &obs, a, step.reward, &step.obs, r.termination.is_terminal(&step.obs), 1.0);
        buffer.push(TransitionRecord {
            obs: obs.clone(),
            action: r.grid[a].clone(),
            reward: step.reward,
            next_obs: step.obs.clone(),
            done: step.done,
        });
        obs = if step.done { env.reset(None)? } else { step.obs };
        if (t + 1) % sched.sweep_every == 0 || t + 1 == sched.steps {
            fitted_q(&mut q, &batch, cfg.sweep_iterations, cfg.ridge)?;
            let greedy = Policy::greedy(q.clone(), r.grid.clone());
            let (curve_return, _) = evaluate_spec(spec, &greedy, cfg.curve_episodes, derive_seed(seed, STREAM_EVAL))?;
            checkpoints.push(Checkpoint { step: t + 1, curve_return, q: q.clone() });
        }
    }
    let policy = Policy::greedy(q, r.grid).with_mask(hidden_indices(&spec.perturbations));
    Ok(OnlineRun { policy, checkpoints, buffer })
}
