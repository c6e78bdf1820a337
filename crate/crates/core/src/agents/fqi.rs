//! Q-functions and the fitted-Q regression shared by every trainer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{dot_sparse, RidgeSystem, SparseRow};

/// Linear Q-function: one weight block per action over shared observation
/// features, i.e. features of (observation, one-hot action).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub features: FeatureMap,
    pub weights: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl QFunction {
    pub fn zeros(features: FeatureMap, n_actions: usize, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParam(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        let dim = features.dim();
        Ok(QFunction { features, weights: vec![vec![0.0; dim]; n_actions], gamma })
    }

    pub fn n_actions(&self) -> usize {
        self.weights.len()
    }

    pub fn values(&self, obs: &[f64]) -> Vec<f64> {
        self.values_row(&self.features.eval_sparse(obs))
    }

    pub fn values_row(&self, row: &SparseRow) -> Vec<f64> {
        self.weights.iter().map(|w| dot_sparse(row, w)).collect()
    }
}

/// First index of the largest value among `allowed` entries.
pub(crate) fn argmax_allowed(values: &[f64], allowed: Option<&[bool]>) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.iter().enumerate() {
        if allowed.is_some_and(|m| !m[i]) {
            continue;
        }
        if best == usize::MAX || *v > best_v {
            best = i;
            best_v = *v;
        }
    }
    if best == usize::MAX {
        0
    } else {
        best
    }
}

/// Empirical action frequencies per tile cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorModel {
    pub features: FeatureMap,
    pub counts: Vec<Vec<f64>>,
}

impl BehaviorModel {
    pub fn fit<'a>(
        features: FeatureMap,
        n_actions: usize,
        samples: impl IntoIterator<Item = (&'a [f64], usize)>,
    ) -> Result<Self> {
        if !features.is_one_hot() {
            return Err(Error::InvalidParam("behavior model needs tile features".into()));
        }
        let mut counts = vec![vec![0.0; n_actions]; features.dim()];
        for (obs, a) in samples {
            let cell = features.active(obs).expect("tile features");
            counts[cell][a] += 1.0;
        }
        Ok(BehaviorModel { features, counts })
    }

    /// Action frequencies in the cell of `obs`; all zero for an unseen cell.
    pub fn probs(&self, obs: &[f64]) -> Vec<f64> {
        let c = &self.counts[self.features.active(obs).expect("tile features")];
        let total: f64 = c.iter().sum();
        if total == 0.0 {
            vec![0.0; c.len()]
        } else {
            c.iter().map(|n| n / total).collect()
        }
    }

    /// Actions with behavior probability at least `tau`, or every action if none qualifies.
    pub fn allowed(&self, obs: &[f64], tau: f64) -> Vec<bool> {
        let mask: Vec<bool> = self.probs(obs).iter().map(|p| *p >= tau).collect();
        if mask.iter().any(|m| *m) {
            mask
        } else {
            vec![true; mask.len()]
        }
    }
}

/// Transitions in feature space, ready for repeated Bellman regressions.
#[derive(Debug, Clone, Default)]
pub struct FqBatch {
    pub rows: Vec<SparseRow>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_rows: Vec<SparseRow>,
    pub dones: Vec<bool>,
    pub weights: Vec<f64>,
    /// Eligible next actions per sample; `None` allows all.
    pub next_allowed: Option<Vec<Vec<bool>>>,
}

impl FqBatch {
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        features: &FeatureMap,
        obs: &[f64],
        action: usize,
        reward: f64,
        next_obs: &[f64],
        done: bool,
        weight: f64,
    ) {
        self.rows.push(features.eval_sparse(obs));
        self.actions.push(action);
        self.rewards.push(reward);
        self.next_rows.push(features.eval_sparse(next_obs));
        self.dones.push(done);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `iterations` rounds of fitted-Q starting from the current weights:
/// targets `r + gamma * max_a' Q(o', a')` (zero past `done`), one weighted
/// ridge regression per action.
pub fn fitted_q(q: &mut QFunction, batch: &FqBatch, iterations: usize, ridge: f64) -> Result<()> {
    let k = q.n_actions();
    let dim = q.features.dim();
    let one_hot = q.features.is_one_hot();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in batch.actions.iter().enumerate() {
        if a >= k {
            return Err(Error::InvalidAction(format!("#{a}")));
        }
        groups[a].push(i);
    }
    let mut systems = Vec::with_capacity(k);
    for g in &groups {
        if g.is_empty() {
            systems.push(None);
            continue;
        }
        let rows: Vec<SparseRow> = g.iter().map(|&i| batch.rows[i].clone()).collect();
        let w: Vec<f64> = g.iter().map(|&i| batch.weights[i]).collect();
        let sys = RidgeSystem::new(&rows, Some(&w), dim, ridge, one_hot)?;
        systems.push(Some((rows, w, sys)));
    }
    let mut seen = vec![vec![false; dim]; k];
    if one_hot {
        for (i, row) in batch.rows.iter().enumerate() {
            if batch.weights[i] > 0.0 {
                for &(j, _) in row {
                    seen[batch.actions[i]][j] = true;
                }
            }
        }
    }
    let mut targets = vec![0.0; batch.len()];
    for _ in 0..iterations {
        for (i, t) in targets.iter_mut().enumerate() {
            *t = batch.rewards[i];
            if !batch.dones[i] && q.gamma > 0.0 {
                let v = q.values_row(&batch.next_rows[i]);
                let allowed = batch.next_allowed.as_ref().map(|m| m[i].as_slice());
                *t += q.gamma * v[argmax_allowed(&v, allowed)];
            }
        }
        for (a, sys) in systems.iter().enumerate() {
            if let Some((rows, w, sys)) = sys {
                let y: Vec<f64> = groups[a].iter().map(|&i| targets[i]).collect();
                q.weights[a] = sys.solve(rows, Some(w), &y);
            }
        }
        if one_hot {
            fill_unseen(q, &seen);
        }
    }
    Ok(())
}

/// Tile cells carry no information about untried actions, so give an untried
/// (cell, action) the worst value tried in that cell, or the worst value
/// anywhere for a cell with no data at all.
fn fill_unseen(q: &mut QFunction, seen: &[Vec<bool>]) {
    let k = q.n_actions();
    let dim = q.features.dim();
    let mut global = f64::INFINITY;
    for a in 0..k {
        for j in 0..dim {
            if seen[a][j] {
                global = global.min(q.weights[a][j]);
            }
        }
    }
    if !global.is_finite() {
        return;
    }
    for j in 0..dim {
        let local = (0..k).filter(|&a| seen[a][j]).map(|a| q.weights[a][j]).fold(f64::INFINITY, f64::min);
        let fill = if local.is_finite() { local } else { global };
        for a in 0..k {
            if !seen[a][j] {
                q.weights[a][j] = fill;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, TileDim};

    fn chain_features() -> FeatureMap {
        FeatureMap::new(FeatureKind::Tile { dims: vec![TileDim::Linear { index: 0, low: -0.5, high: 2.5, bins: 3 }] }, 1).unwrap()
    }

    #[test]
    fn two_step_chain_values() {
        // 0 -a1-> 1 -a1-> 2 (done, reward 1); a0 stays with reward 0
        let f = chain_features();
        let mut b = FqBatch::default();
        b.push(&f, &[0.0], 1, 0.0, &[1.0], false, 1.0);
        b.push(&f, &[1.0], 1, 1.0, &[2.0], true, 1.0);
        b.push(&f, &[0.0], 0, 0.0, &[0.0], false, 1.0);
        b.push(&f, &[1.0], 0, 0.0, &[1.0], false, 1.0);
        let mut q = QFunction::zeros(f, 2, 0.9).unwrap();
        fitted_q(&mut q, &b, 200, 0.0).unwrap();
        assert!((q.values(&[1.0])[1] - 1.0).abs() < 1e-9);
        assert!((q.values(&[0.0])[1] - 0.9).abs() < 1e-9);
        assert!((q.values(&[0.0])[0] - 0.81).abs() < 1e-6);
    }

    #[test]
    fn myopic_q_is_reward() {
        let f = chain_features();
        let mut b = FqBatch::default();
        for (o, r) in [(0.0, 1.0), (0.0, 3.0), (1.0, -2.0)] {
            b.push(&f, &[o], 0, r, &[2.0], false, 1.0);
        }
        let mut q = QFunction::zeros(f, 1, 0.0).unwrap();
        fitted_q(&mut q, &b, 3, 0.0).unwrap();
        assert_eq!(q.values(&[0.0])[0], 2.0);
        assert_eq!(q.values(&[1.0])[0], -2.0);
    }

    #[test]
    fn behavior_constraint_falls_back() {
        let f = chain_features();
        let samples = [(vec![0.0], 1usize), (vec![0.0], 1), (vec![0.0], 0), (vec![1.0], 0)];
        let bm = BehaviorModel::fit(f, 2, samples.iter().map(|(o, a)| (o.as_slice(), *a))).unwrap();
        assert_eq!(bm.allowed(&[0.0], 0.5), vec![false, true]);
        assert_eq!(bm.allowed(&[0.0], 0.0), vec![true, true]);
        assert_eq!(bm.allowed(&[2.0], 0.5), vec![true, true]);
        assert_eq!(argmax_allowed(&[3.0, 1.0], Some(&[false, true])), 1);
    }
}
