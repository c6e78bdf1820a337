use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::{BehaviorMode, Corruption, Dataset};
use crate::error::{Error, Result};
use crate::perturb::hidden_indices;
use crate::seed::{derive_seed, rng_for, STREAM_CORRUPTION};

/// Add `N(0, sigma^2)` noise to every observation entry.
///
/// Draws depend only on `(seed, record index, entry)`. When record `t`
/// continues the episode of record `t - 1`, its `o` reuses the draw given to
/// `o2` of record `t - 1`, so one underlying state is perturbed once.
pub fn corrupt_obs_noise(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParam(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = dataset.clone();
    out.meta.corruption.push(Corruption::ObsNoise { sigma, seed });
    if sigma == 0.0 {
        return Ok(out);
    }
    out.meta.behavior_mode = BehaviorMode::Privileged;
    let dim = dataset.meta.obs_dim;
    let mut prev_next_noise: Vec<f64> = Vec::new();
    for (t, rec) in out.records.iter_mut().enumerate() {
        let mut rng = rng_for(derive_seed(seed, t as u64), STREAM_CORRUPTION);
        let mut draw = || -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        };
        let own_obs: Vec<f64> = (0..dim).map(|_| draw()).collect();
        let next_noise: Vec<f64> = (0..dim).map(|_| draw()).collect();
        let chained = t > 0 && {
            let prev = &dataset.records[t - 1];
            !prev.done && prev.next_obs == dataset.records[t].obs
        };
        let obs_noise = if chained { &prev_next_noise } else { &own_obs };
        for (v, e) in rec.obs.0.iter_mut().zip(obs_noise) {
            *v += e;
        }
        for (v, e) in rec.next_obs.0.iter_mut().zip(&next_noise) {
            *v += e;
        }
        prev_next_noise = next_noise;
    }
    Ok(out)
}

/// Set the listed observation entries to exactly zero in every record.
pub fn corrupt_hide_dims(dataset: &Dataset, indices: &[usize]) -> Result<Dataset> {
    let dim = dataset.meta.obs_dim;
    if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange { index: bad, dim });
    }
    let mut out = dataset.clone();
    out.meta.corruption.push(Corruption::HiddenDims { indices: indices.to_vec() });
    if indices.is_empty() {
        return Ok(out);
    }
    // zeroing what the collecting policy already could not see adds no confounding
    let unseen = hidden_indices(&dataset.meta.env_perturbations);
    if !indices.iter().all(|i| unseen.contains(i)) {
        out.meta.behavior_mode = BehaviorMode::Privileged;
    }
    for rec in &mut out.records {
        for &i in indices {
            rec.obs.0[i] = 0.0;
            rec.next_obs.0[i] = 0.0;
        }
    }
    Ok(out)
}
