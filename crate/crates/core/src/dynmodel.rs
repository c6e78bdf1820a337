//! Gaussian ensemble dynamics models: a direct model of `(o', r)` and a
//! simulator-anchored correction model of `(o' - o'_sim, r)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::envs::ActValue;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMap};
use crate::linalg::{dot_sparse, RidgeSystem, SparseRow};
use crate::seed::{derive_seed, rng_for, STREAM_MODEL};
use crate::sim::Simulator;

pub const ENSEMBLE_FORMAT: &str = "b4mrl-ens/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub features: FeatureKind,
    pub members: usize,
    pub ridge: f64,
    pub holdout: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            features: FeatureKind::Polynomial { degree: 3 },
            members: 5,
            ridge: 1e-3,
            holdout: 0.1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    Direct,
    Correction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    Frobenius,
    #[default]
    Disagreement,
}

/// Model input: the observation followed by the action (a discrete action
/// contributes its index).
pub fn encode_input(obs: &[f64], action: &ActValue) -> Vec<f64> {
    let mut x = obs.to_vec();
    match action {
        ActValue::Discrete(i) => x.push(*i as f64),
        ActValue::Continuous(v) => x.extend_from_slice(v),
    }
    x
}

/// Ridge regression in fixed features with a per-target Gaussian residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRegressor {
    pub features: FeatureMap,
    /// Weighted target mean; the ridge fit is on centered targets, so an
    /// input with no feature support predicts the mean.
    pub intercept: Vec<f64>,
    /// `weights[t]` has one entry per feature.
    pub weights: Vec<Vec<f64>>,
    pub noise_var: Vec<f64>,
    /// Tile features only: residual variance per cell, and for cells without
    /// training data the variance of the targets themselves.
    #[serde(default)]
    pub cell_var: Option<Vec<Vec<f64>>>,
}

impl GaussianRegressor {
    /// Fit on rows with positive `train_weight`; residual variance is
    /// measured on `holdout` rows, or on the training rows if there are none.
    pub fn fit(
        features: FeatureMap,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        train_weight: &[f64],
        holdout: &[usize],
        ridge: f64,
    ) -> Result<Self> {
        let n_targets = targets.first().map_or(0, |t| t.len());
        let train_inputs: Vec<Vec<f64>> =
            inputs.iter().zip(train_weight).filter(|(_, w)| **w > 0.0).map(|(x, _)| x.clone()).collect();
        if train_inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let features = features.standardize(&train_inputs);
        let rows: Vec<SparseRow> = inputs.iter().map(|x| features.eval_sparse(x)).collect();
        let total_w: f64 = train_weight.iter().sum();
        let intercept: Vec<f64> = (0..n_targets)
            .map(|t| targets.iter().zip(train_weight).map(|(y, w)| w * y[t]).sum::<f64>() / total_w)
            .collect();
        let system = RidgeSystem::new(&rows, Some(train_weight), features.dim(), ridge, features.is_one_hot())?;
        let weights: Vec<Vec<f64>> = (0..n_targets)
            .map(|t| {
                let y: Vec<f64> = targets.iter().map(|v| v[t] - intercept[t]).collect();
                system.solve(&rows, Some(train_weight), &y)
            })
            .collect();
        let eval_rows: Vec<(usize, f64)> = if holdout.is_empty() {
            train_weight.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, w)| (i, *w)).collect()
        } else {
            holdout.iter().map(|&i| (i, 1.0)).collect()
        };
        let norm: f64 = eval_rows.iter().map(|(_, w)| w).sum();
        let noise_var = (0..n_targets)
            .map(|t| {
                eval_rows
                    .iter()
                    .map(|&(i, w)| {
                        let e = targets[i][t] - intercept[t] - dot_sparse(&rows[i], &weights[t]);
                        w * e * e
                    })
                    .sum::<f64>()
                    / norm
            })
            .collect();
        let cell_var = features.is_one_hot().then(|| {
            let mut sum = vec![vec![0.0; n_targets]; features.dim()];
            let mut mass = vec![0.0; features.dim()];
            let mut prior = vec![0.0; n_targets];
            for (i, &w) in train_weight.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let cell = rows[i][0].0;
                mass[cell] += w;
                for t in 0..n_targets {
                    let e = targets[i][t] - intercept[t] - dot_sparse(&rows[i], &weights[t]);
                    sum[cell][t] += w * e * e;
                    prior[t] += w * (targets[i][t] - intercept[t]).powi(2) / total_w;
                }
            }
            sum.into_iter()
                .zip(mass)
                .map(|(s, m)| if m > 0.0 { s.iter().map(|v| v / m).collect() } else { prior.clone() })
                .collect()
        });
        let r = GaussianRegressor { features, intercept, weights, noise_var, cell_var };
        if r.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Singular { ridge });
        }
        Ok(r)
    }

    pub fn mean(&self, x: &[f64]) -> Vec<f64> {
        let row = self.features.eval_sparse(x);
        self.weights.iter().zip(&self.intercept).map(|(w, b)| b + dot_sparse(&row, w)).collect()
    }

    /// Predictive residual variance per target at `x`.
    pub fn var(&self, x: &[f64]) -> Vec<f64> {
        match (&self.cell_var, self.features.active(x)) {
            (Some(cv), Some(cell)) => cv[cell].clone(),
            _ => self.noise_var.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub next_obs: Vec<f64>,
    pub reward: f64,
    pub var: Vec<f64>,
}

/// One Gaussian draw from a member.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSample {
    /// Observation part of the draw: `o' - o'_sim` in correction mode, `o'` in direct mode.
    pub delta: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEnsemble {
    pub format_version: String,
    pub mode: ModelMode,
    pub obs_dim: usize,
    pub members: Vec<GaussianRegressor>,
}

impl CorrectionEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn base<'a>(&self, o_sim: Option<&'a [f64]>) -> Result<Option<&'a [f64]>> {
        match self.mode {
            ModelMode::Direct => Ok(None),
            ModelMode::Correction => o_sim.map(Some).ok_or(Error::MissingSimPrediction),
        }
    }

    pub fn predict(&self, member: usize, obs: &[f64], action: &ActValue, o_sim: Option<&[f64]>) -> Result<Prediction> {
        let base = self.base(o_sim)?;
        let m = &self.members[member];
        let x = encode_input(obs, action);
        let mu = m.mean(&x);
        let next_obs = (0..self.obs_dim).map(|d| base.map_or(0.0, |b| b[d]) + mu[d]).collect();
        Ok(Prediction { next_obs, reward: mu[self.obs_dim], var: m.var(&x) })
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        member: usize,
        obs: &[f64],
        action: &ActValue,
        o_sim: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<ModelSample> {
        let base = self.base(o_sim)?;
        let m = &self.members[member];
        let x = encode_input(obs, action);
        let mu = m.mean(&x);
        let draw: Vec<f64> = mu
            .iter()
            .zip(&m.var(&x))
            .map(|(mean, var)| {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            })
            .collect();
        let delta = draw[..self.obs_dim].to_vec();
        let next_obs = (0..self.obs_dim).map(|d| base.map_or(0.0, |b| b[d]) + delta[d]).collect();
        Ok(ModelSample { delta, reward: draw[self.obs_dim], next_obs })
    }

    /// Uncertainty of the ensemble at `(obs, action)`; always `>= 0`.
    ///
    /// `Frobenius` is the largest member's `||diag(var(x))||_F`;
    /// `Disagreement` is the largest distance of a member's mean from the
    /// ensemble mean.
    pub fn penalty(&self, obs: &[f64], action: &ActValue, mode: PenaltyMode) -> f64 {
        let x = encode_input(obs, action);
        match mode {
            PenaltyMode::Frobenius => self
                .members
                .iter()
                .map(|m| m.var(&x).iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            PenaltyMode::Disagreement => {
                let mus: Vec<Vec<f64>> = self.members.iter().map(|m| m.mean(&x)).collect();
                let k = mus.len() as f64;
                let avg: Vec<f64> = (0..mus[0].len()).map(|d| mus.iter().map(|m| m[d]).sum::<f64>() / k).collect();
                mus.iter()
                    .map(|m| m.iter().zip(&avg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: CorrectionEnsemble = serde_json::from_str(s)?;
        if e.format_version != ENSEMBLE_FORMAT {
            return Err(Error::Version { line: 1, found: e.format_version, expected: ENSEMBLE_FORMAT.into() });
        }
        Ok(e)
    }
}

/// A dataset together with the simulator's one-step prediction for each record.
#[derive(Debug, Clone)]
pub struct Augmented<'a> {
    pub dataset: &'a Dataset,
    pub o_sim: Vec<Vec<f64>>,
}

pub fn augment_with_sim<'a>(dataset: &'a Dataset, sim: &dyn Simulator) -> Result<Augmented<'a>> {
    if sim.obs_dim() != dataset.meta.obs_dim {
        return Err(Error::InvalidParam(format!(
            "simulator observes {} entries, dataset {}",
            sim.obs_dim(),
            dataset.meta.obs_dim
        )));
    }
    let o_sim = dataset.records.iter().map(|r| sim.predict(&r.obs, &r.action)).collect::<Result<_>>()?;
    Ok(Augmented { dataset, o_sim })
}

pub fn fit_correction_ensemble(aug: &Augmented, cfg: &ModelConfig) -> Result<CorrectionEnsemble> {
    let d = aug.dataset;
    let targets: Vec<Vec<f64>> = d
        .records
        .iter()
        .zip(&aug.o_sim)
        .map(|(r, s)| {
            let mut t: Vec<f64> = r.next_obs.iter().zip(s).map(|(o2, os)| o2 - os).collect();
            t.push(r.reward);
            t
        })
        .collect();
    fit_ensemble(d, targets, cfg, ModelMode::Correction)
}

pub fn fit_direct_ensemble(dataset: &Dataset, cfg: &ModelConfig) -> Result<CorrectionEnsemble> {
    let targets = dataset
        .records
        .iter()
        .map(|r| {
            let mut t = r.next_obs.0.clone();
            t.push(r.reward);
            t
        })
        .collect();
    fit_ensemble(dataset, targets, cfg, ModelMode::Direct)
}

fn fit_ensemble(d: &Dataset, targets: Vec<Vec<f64>>, cfg: &ModelConfig, mode: ModelMode) -> Result<CorrectionEnsemble> {
    if d.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.members == 0 {
        return Err(Error::InvalidParam("ensemble needs at least one member".into()));
    }
    if !(0.0..1.0).contains(&cfg.holdout) {
        return Err(Error::InvalidParam(format!("holdout fraction must lie in [0, 1), got {}", cfg.holdout)));
    }
    let inputs: Vec<Vec<f64>> = d.records.iter().map(|r| encode_input(&r.obs, &r.action)).collect();
    let n = inputs.len();
    let input_dim = inputs[0].len();
    let n_hold = ((n as f64) * cfg.holdout).round() as usize;
    let n_hold = if n_hold >= n { 0 } else { n_hold };
    let mut members = Vec::with_capacity(cfg.members);
    for m in 0..cfg.members {
        let mut rng = rng_for(derive_seed(cfg.seed, m as u64), STREAM_MODEL);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (hold, train) = order.split_at(n_hold);
        let mut weight = vec![0.0; n];
        if cfg.bootstrap {
            for _ in 0..train.len() {
                weight[train[rng.random_range(0..train.len())]] += 1.0;
            }
        } else {
            for &i in train {
                weight[i] = 1.0;
            }
        }
        let kind = match &cfg.features {
            FeatureKind::RandomFourier { count, bandwidth, seed } => FeatureKind::RandomFourier {
                count: *count,
                bandwidth: *bandwidth,
                seed: derive_seed(*seed, m as u64),
            },
            other => other.clone(),
        };
        let fm = FeatureMap::new(kind, input_dim)?;
        members.push(GaussianRegressor::fit(fm, &inputs, &targets, &weight, hold, cfg.ridge)?);
    }
    Ok(CorrectionEnsemble { format_version: ENSEMBLE_FORMAT.into(), mode, obs_dim: d.meta.obs_dim, members })
}
