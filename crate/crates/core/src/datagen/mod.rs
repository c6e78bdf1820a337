//! Offline dataset generation: tiered behavior policies, privileged and
//! history-aware collection, dataset corruption, and the file format.

mod collect;
mod corrupt;
pub(crate) mod dataset;
mod tiers;

pub use collect::{collect_dataset, collect_history_confounded, HistorySwingUp};
pub use corrupt::{corrupt_hide_dims, corrupt_obs_noise};
pub use dataset::{
    read_dataset, read_from, write_dataset, BehaviorMode, Corruption, Dataset, DatasetMeta, Tier, TransitionRecord,
    FORMAT_VERSION,
};
pub use tiers::{generate_tier_dataset, train_tier_policy, train_tiers, TierConfig, TierPolicy, TierTraining};

use std::collections::BTreeSet;

use crate::perturb::hidden_indices;

/// Observation entries that are zero throughout a dataset, whether hidden at
/// collection time or zeroed afterwards.
pub fn hidden_dims_of(meta: &DatasetMeta) -> Vec<usize> {
    let mut set: BTreeSet<usize> = hidden_indices(&meta.env_perturbations).into_iter().collect();
    for c in &meta.corruption {
        if let Corruption::HiddenDims { indices } = c {
            set.extend(indices.iter().copied());
        }
    }
    set.into_iter().collect()
}
