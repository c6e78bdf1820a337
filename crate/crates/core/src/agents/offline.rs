use super::fqi::{fitted_q, BehaviorModel, FqBatch, QFunction};
use super::policy::{Policy, PolicyKind};
use super::{env_of, grid_index, resolve, AgentConfig, Termination};
use crate::datagen::{hidden_dims_of, Dataset};
use crate::envs::ActValue;
use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Dataset transitions as a unit-weight batch. The recorded done flag is
/// not used: time-limit ends would otherwise look terminal.
pub(crate) fn dataset_batch(dataset: &Dataset, features: &FeatureMap, grid: &[ActValue], term: Termination) -> FqBatch {
    let mut b = FqBatch::default();
    for r in &dataset.records {
        b.push(features, &r.obs, grid_index(grid, &r.action), r.reward, &r.next_obs, term.is_terminal(&r.next_obs), 1.0);
    }
    b
}

/// Unconstrained fitted-Q on the dataset.
pub fn train_offline_fq(dataset: &Dataset, cfg: &AgentConfig) -> Result<Policy> {
    train(dataset, cfg, None)
}

/// Fitted-Q whose argmax (in targets and in the final policy) only ranges
/// over actions the dataset's behavior chose with frequency at least
/// `bc_threshold` in the same tile cell.
pub fn train_offline_bcq(dataset: &Dataset, cfg: &AgentConfig) -> Result<Policy> {
    train(dataset, cfg, Some(cfg.bc_threshold))
}

fn train(dataset: &Dataset, cfg: &AgentConfig, tau: Option<f64>) -> Result<Policy> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let r = resolve(&env_of(&dataset.meta), cfg)?;
    let features = FeatureMap::new(r.q_features.clone(), r.obs_dim)?;
    let mut batch = dataset_batch(dataset, &features, &r.grid, r.termination);
    let constraint = match tau {
        Some(tau) if tau > 0.0 => {
            let bm = BehaviorModel::fit(
                features.clone(),
                r.grid.len(),
                dataset.records.iter().map(|rec| (rec.obs.0.as_slice(), grid_index(&r.grid, &rec.action))),
            )?;
            batch.next_allowed = Some(dataset.records.iter().map(|rec| bm.allowed(&rec.next_obs, tau)).collect());
            Some((bm, tau))
        }
        _ => None,
    };
    let mut q = QFunction::zeros(features, r.grid.len(), r.gamma)?;
    fitted_q(&mut q, &batch, cfg.fq_iterations, cfg.ridge)?;
    let mut policy = Policy::greedy(q, r.grid).with_mask(hidden_dims_of(&dataset.meta));
    if let PolicyKind::Greedy { constraint: c, .. } = &mut policy.kind {
        *c = constraint;
    }
    Ok(policy)
}
