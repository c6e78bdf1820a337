use serde::{Deserialize, Serialize};

use super::collect::{collect_dataset, meta_for};
use super::dataset::{BehaviorMode, Dataset, Tier};
use crate::agents::{env_defaults, evaluate_spec, train_online_q, AgentConfig, OnlineRun, Policy};
use crate::bench::normalize_score;
use crate::error::{Error, Result};
use crate::perturb::EnvSpec;
use crate::seed::{derive_seed, STREAM_EVAL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierConfig {
    /// Exploration mixed into medium and expert behavior during collection.
    pub collect_epsilon: f64,
    /// Normalized-score band for the medium checkpoint: the first checkpoint
    /// inside it, else the one nearest to it.
    pub medium_band: (f64, f64),
    pub reference_episodes: usize,
}

impl Default for TierConfig {
    fn default() -> Self {
        TierConfig { collect_epsilon: 0.1, medium_band: (40.0, 50.0), reference_episodes: 100 }
    }
}

/// One online training run with every checkpoint scored.
#[derive(Debug, Clone)]
pub struct TierTraining {
    pub random_ref: f64,
    pub expert_ref: f64,
    /// Mean greedy return of each checkpoint over the reference episodes.
    pub checkpoint_returns: Vec<f64>,
    pub expert_index: usize,
    /// First checkpoint at medium level; the medium-replay buffer ends here.
    pub medium_index: usize,
    /// The medium checkpoint, or the expert with this much uniform
    /// exploration when no checkpoint lands in the band.
    pub medium: Policy,
    pub medium_return: f64,
    pub run: OnlineRun,
}

#[derive(Debug, Clone)]
pub struct TierPolicy {
    pub policy: Policy,
    pub raw_return: f64,
    pub normalized: f64,
}

impl TierTraining {
    pub fn normalized(&self, raw: f64) -> f64 {
        normalize_score(raw, self.random_ref, self.expert_ref).expect("references checked at construction")
    }

    pub fn tier_policy(&self, tier: Tier) -> Result<TierPolicy> {
        let (policy, raw) = match tier {
            Tier::Random => (Policy::uniform(self.run.policy.action_grid.clone()), self.random_ref),
            Tier::Medium => (self.medium.clone(), self.medium_return),
            Tier::Expert => (self.run.policy_at(self.expert_index), self.checkpoint_returns[self.expert_index]),
            other => return Err(Error::InvalidParam(format!("tier {} is a dataset mix, not a policy", other.as_str()))),
        };
        Ok(TierPolicy { policy, raw_return: raw, normalized: self.normalized(raw) })
    }
}

/// Train online on `spec`, score every checkpoint, and pick the expert (best
/// checkpoint) and medium (first checkpoint inside the medium band, else the
/// expert diluted with exploration until it scores inside the band). Given
/// `refs`, normalization uses them instead of this run's own scores.
pub fn train_tiers(
    spec: &EnvSpec,
    agent: &AgentConfig,
    tiers: &TierConfig,
    seed: u64,
    refs: Option<(f64, f64)>,
) -> Result<TierTraining> {
    let (low, high) = tiers.medium_band;
    if !(low < high) {
        return Err(Error::InvalidParam(format!("medium band ({low}, {high}) is empty")));
    }
    let run = train_online_q(spec, agent, seed)?;
    let eval_seed = derive_seed(seed, STREAM_EVAL);
    let grid = env_defaults(&spec.env, agent.action_bins)?.action_grid;
    let episodes = tiers.reference_episodes;
    let score = |p: &Policy| evaluate_spec(spec, p, episodes, eval_seed).map(|r| r.0);
    let checkpoint_returns: Vec<f64> = (0..run.checkpoints.len()).map(|i| score(&run.policy_at(i))).collect::<Result<_>>()?;
    let expert_index = (0..checkpoint_returns.len())
        .fold(0, |best, i| if checkpoint_returns[i] > checkpoint_returns[best] { i } else { best });
    let (random_ref, expert_ref) = match refs {
        Some(r) => r,
        None => (score(&Policy::uniform(grid))?, checkpoint_returns[expert_index]),
    };
    normalize_score(random_ref, random_ref, expert_ref)?;
    let norm = |raw: f64| 100.0 * (raw - random_ref) / (expert_ref - random_ref);
    let best = norm(checkpoint_returns[expert_index]);
    if best < low {
        return Err(Error::BudgetTooSmall { achieved: best, target: low });
    }
    let in_band = |n: f64| (low..=high).contains(&n);
    let (medium_index, medium, medium_return) = match checkpoint_returns.iter().position(|&r| in_band(norm(r))) {
        Some(i) => (i, run.policy_at(i), checkpoint_returns[i]),
        None => {
            let first = checkpoint_returns.iter().position(|&r| norm(r) >= low).unwrap_or(expert_index);
            let expert = run.policy_at(expert_index);
            // score falls from expert level at 0 towards random level at 1
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut found = None;
            for _ in 0..30 {
                let eps = 0.5 * (lo + hi);
                let p = expert.clone().with_epsilon(eps);
                let raw = score(&p)?;
                let n = norm(raw);
                if in_band(n) {
                    found = Some((p, raw));
                    break;
                }
                if n > high {
                    lo = eps;
                } else {
                    hi = eps;
                }
            }
            let (p, raw) = found.ok_or(Error::BudgetTooSmall { achieved: best, target: low })?;
            (first, p, raw)
        }
    };
    Ok(TierTraining { random_ref, expert_ref, checkpoint_returns, expert_index, medium_index, medium, medium_return, run })
}

pub fn train_tier_policy(spec: &EnvSpec, tier: Tier, agent: &AgentConfig, tiers: &TierConfig, seed: u64) -> Result<TierPolicy> {
    train_tiers(spec, agent, tiers, seed, None)?.tier_policy(tier)
}

/// Collect a tier dataset from an already scored training run.
pub fn generate_tier_dataset(
    training: &TierTraining,
    spec: &EnvSpec,
    tier: Tier,
    n_records: usize,
    tiers: &TierConfig,
    seed: u64,
) -> Result<Dataset> {
    let collect = |t: Tier, n: usize, s: u64| -> Result<Dataset> {
        let mut policy = training.tier_policy(t)?.policy;
        if t != Tier::Random {
            let eps = 1.0 - (1.0 - policy.epsilon) * (1.0 - tiers.collect_epsilon);
            policy = policy.with_epsilon(eps);
        }
        let mut env = spec.build()?;
        let mut d = collect_dataset(env.as_mut(), &mut policy, n, BehaviorMode::Observed, s)?;
        d.meta.env_perturbations = spec.perturbations.clone();
        d.meta.tier = t;
        Ok(d)
    };
    match tier {
        Tier::Random | Tier::Medium | Tier::Expert => collect(tier, n_records, seed),
        Tier::MediumExpert => {
            let half = n_records / 2;
            let m = collect(Tier::Medium, half.max(1), derive_seed(seed, 1))?;
            let e = collect(Tier::Expert, (n_records - half).max(1), derive_seed(seed, 2))?;
            Dataset::concat(&[&m, &e], Tier::MediumExpert)
        }
        Tier::MediumReplay => {
            let end = training.run.checkpoints[training.medium_index].step;
            let env = spec.build()?;
            let mut meta = meta_for(env.as_ref(), BehaviorMode::Observed, seed);
            meta.env_perturbations = spec.perturbations.clone();
            meta.tier = Tier::MediumReplay;
            Dataset::new(meta, training.run.buffer[..end].to_vec())
        }
    }
}
