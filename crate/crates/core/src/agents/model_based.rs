use rand::Rng;

use super::fqi::{argmax_allowed, fitted_q, QFunction};
use super::offline::dataset_batch;
use super::policy::Policy;
use super::{env_of, resolve, AgentConfig};
use crate::datagen::{hidden_dims_of, Dataset};
use crate::dynmodel::{augment_with_sim, fit_correction_ensemble, fit_direct_ensemble, CorrectionEnsemble, ModelConfig, ModelMode};
use crate::envs::ActValue;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::seed::{derive_seed, rng_for, STREAM_MODEL};
use crate::sim::Simulator;

/// One synthetic transition, with everything needed to replay its algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub epoch: usize,
    pub rollout: usize,
    pub step: usize,
    /// Dataset record the rollout started from.
    pub start_index: usize,
    pub obs: Vec<f64>,
    pub action: ActValue,
    pub o_sim: Option<Vec<f64>>,
    pub member: usize,
    pub delta: Vec<f64>,
    pub reward: f64,
    pub penalty: f64,
    pub penalized_reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ModelBasedRun {
    pub policy: Policy,
    pub ensemble: CorrectionEnsemble,
    pub traces: Vec<RolloutTrace>,
}

/// Direct dynamics ensemble, penalized model rollouts, fitted-Q on data plus rollouts.
pub fn train_mopo_lite(dataset: &Dataset, cfg: &AgentConfig, seed: u64) -> Result<ModelBasedRun> {
    run(dataset, None, cfg, seed)
}

/// The hybrid loop: simulator-anchored correction ensemble, rollouts whose
/// next observation is `o'_sim + delta` from a randomly chosen member each
/// step, penalized rewards, fitted-Q on data plus rollouts.
pub fn train_hymopo(dataset: &Dataset, sim: &dyn Simulator, cfg: &AgentConfig, seed: u64) -> Result<ModelBasedRun> {
    run(dataset, Some(sim), cfg, seed)
}

fn run(dataset: &Dataset, sim: Option<&dyn Simulator>, cfg: &AgentConfig, seed: u64) -> Result<ModelBasedRun> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let r = resolve(&env_of(&dataset.meta), cfg)?;
    let model_cfg = ModelConfig { seed: derive_seed(seed, r.model.seed), ..r.model.clone() };
    let ensemble = match sim {
        Some(s) => fit_correction_ensemble(&augment_with_sim(dataset, s)?, &model_cfg)?,
        None => fit_direct_ensemble(dataset, &model_cfg)?,
    };
    let features = FeatureMap::new(r.q_features.clone(), r.obs_dim)?;
    let base = dataset_batch(dataset, &features, &r.grid, r.termination);
    let mut q = QFunction::zeros(features.clone(), r.grid.len(), r.gamma)?;
    let mut rng = rng_for(seed, STREAM_MODEL);
    let mut traces: Vec<RolloutTrace> = Vec::new();
    let per_epoch = cfg.fq_iterations / cfg.epochs;
    for epoch in 0..cfg.epochs {
        if epoch > 0 && cfg.horizon > 0 {
            for rollout in 0..cfg.rollout_batch {
                let start_index = rng.random_range(0..dataset.len());
                let mut obs = dataset.records[start_index].obs.0.clone();
                for step in 0..cfg.horizon {
                    let a = if rng.random_bool(cfg.rollout_epsilon) {
                        rng.random_range(0..r.grid.len())
                    } else {
                        argmax_allowed(&q.values(&obs), None)
                    };
                    let action = r.grid[a].clone();
                    let o_sim = match (ensemble.mode, sim) {
                        (ModelMode::Correction, Some(s)) => Some(s.predict(&obs, &action)?),
                        _ => None,
                    };
                    let member = rng.random_range(0..ensemble.len());
                    let sample = ensemble.sample(member, &obs, &action, o_sim.as_deref(), &mut rng)?;
                    let penalty = ensemble.penalty(&obs, &action, cfg.penalty);
                    let penalized_reward = sample.reward - cfg.lambda * penalty;
                    let done = r.termination.is_terminal(&sample.next_obs);
                    traces.push(RolloutTrace {
                        epoch,
                        rollout,
                        step,
                        start_index,
                        obs: obs.clone(),
                        action,
                        o_sim,
                        member,
                        delta: sample.delta,
                        reward: sample.reward,
                        penalty,
                        penalized_reward,
                        next_obs: sample.next_obs.clone(),
                        done,
                    });
                    if done {
                        break;
                    }
                    obs = sample.next_obs;
                }
            }
        }
        let mut batch = base.clone();
        if !traces.is_empty() {
            let share = cfg.model_fraction / (1.0 - cfg.model_fraction);
            let w = share * dataset.len() as f64 / traces.len() as f64;
            for t in &traces {
                let a = super::grid_index(&r.grid, &t.action);
                batch.push(&features, &t.obs, a, t.penalized_reward, &t.next_obs, t.done, w);
            }
        }
        let iterations = if epoch + 1 == cfg.epochs { cfg.fq_iterations - per_epoch * (cfg.epochs - 1) } else { per_epoch };
        fitted_q(&mut q, &batch, iterations, cfg.ridge)?;
    }
    let policy = Policy::greedy(q, r.grid).with_mask(hidden_dims_of(&dataset.meta));
    Ok(ModelBasedRun { policy, ensemble, traces })
}
