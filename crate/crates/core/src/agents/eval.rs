use super::policy::Policy;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::oracle::TabularModel;
use crate::perturb::EnvSpec;
use crate::seed::{derive_seed, STREAM_EVAL};

/// Mean and sample standard deviation of undiscounted returns of `policy`
/// as given, its epsilon included. A single episode reports a standard
/// deviation of zero.
pub fn evaluate_policy(env: &mut dyn Environment, policy: &Policy, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::InvalidParam("episodes must be >= 1".into()));
    }
    let mut p = policy.clone();
    let mut returns = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut obs = env.reset(if ep == 0 { Some(derive_seed(seed, STREAM_EVAL)) } else { None })?;
        let mut total = 0.0;
        loop {
            let i = p.act_index(&obs);
            let step = env.step(&p.action_grid[i])?;
            total += step.reward;
            obs = step.obs;
            if step.done {
                break;
            }
        }
        returns.push(total);
    }
    Ok(mean_std(&returns))
}

pub fn evaluate_spec(spec: &EnvSpec, policy: &Policy, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    let mut env = spec.build()?;
    evaluate_policy(env.as_mut(), policy, episodes, seed)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-state action distribution of `policy` on an enumerated model,
/// fed each state's full observation.
pub fn policy_table(model: &TabularModel, policy: &Policy) -> Vec<Vec<f64>> {
    model.observations.iter().map(|o| policy.action_probs(o)).collect()
}
