use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fqi::{argmax_allowed, BehaviorModel, QFunction};
use crate::envs::ActValue;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::seed::{rng_for, STREAM_POLICY};

pub const POLICY_FORMAT: &str = "b4mrl-pol/1";

/// Anything that maps an input vector to an action.
pub trait Actor {
    fn act(&mut self, input: &[f64]) -> Result<ActValue>;
    /// Restart any internal randomness from `seed`.
    fn reseed(&mut self, _seed: u64) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Uniform,
    /// Argmax of `q`, optionally restricted to actions the behavior model supports.
    Greedy {
        q: QFunction,
        #[serde(default)]
        constraint: Option<(BehaviorModel, f64)>,
    },
    /// Explicit action distribution per tile cell.
    Table { features: FeatureMap, probs: Vec<Vec<f64>> },
}

/// Decision rule over a fixed action grid, epsilon-soft around its base choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Policy {
    pub format_version: String,
    pub kind: PolicyKind,
    pub action_grid: Vec<ActValue>,
    pub epsilon: f64,
    /// Input entries zeroed before the policy looks at them.
    #[serde(default)]
    pub obs_mask: Vec<usize>,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl PartialEq for Policy {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.action_grid == other.action_grid
            && self.epsilon == other.epsilon
            && self.obs_mask == other.obs_mask
    }
}

impl Policy {
    fn build(kind: PolicyKind, action_grid: Vec<ActValue>) -> Self {
        Policy { format_version: POLICY_FORMAT.into(), kind, action_grid, epsilon: 0.0, obs_mask: Vec::new(), rng: default_rng() }
    }

    pub fn uniform(action_grid: Vec<ActValue>) -> Self {
        Policy::build(PolicyKind::Uniform, action_grid)
    }

    pub fn greedy(q: QFunction, action_grid: Vec<ActValue>) -> Self {
        Policy::build(PolicyKind::Greedy { q, constraint: None }, action_grid)
    }

    pub fn table(features: FeatureMap, probs: Vec<Vec<f64>>, action_grid: Vec<ActValue>) -> Result<Self> {
        if !features.is_one_hot() || probs.len() != features.dim() || probs.iter().any(|p| p.len() != action_grid.len()) {
            return Err(Error::InvalidParam("table policy needs one distribution per tile cell".into()));
        }
        Ok(Policy::build(PolicyKind::Table { features, probs }, action_grid))
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_mask(mut self, mask: Vec<usize>) -> Self {
        self.obs_mask = mask;
        self
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = rng_for(seed, STREAM_POLICY);
    }

    pub fn n_actions(&self) -> usize {
        self.action_grid.len()
    }

    fn masked(&self, obs: &[f64]) -> Vec<f64> {
        let mut o = obs.to_vec();
        for &i in &self.obs_mask {
            if i < o.len() {
                o[i] = 0.0;
            }
        }
        o
    }

    /// Distribution the policy would act from before epsilon mixing.
    fn base_probs(&self, obs: &[f64]) -> Vec<f64> {
        let k = self.n_actions();
        match &self.kind {
            PolicyKind::Uniform => vec![1.0 / k as f64; k],
            PolicyKind::Greedy { .. } => {
                let mut p = vec![0.0; k];
                p[self.greedy_index(obs)] = 1.0;
                p
            }
            PolicyKind::Table { features, probs } => probs[features.active(&self.masked(obs)).expect("tile features")].clone(),
        }
    }

    /// The greedy choice (ignores epsilon). Uniform policies report index 0.
    pub fn greedy_index(&self, obs: &[f64]) -> usize {
        let o = self.masked(obs);
        match &self.kind {
            PolicyKind::Greedy { q, constraint } => {
                let v = q.values(&o);
                let allowed = constraint.as_ref().map(|(b, tau)| b.allowed(&o, *tau));
                argmax_allowed(&v, allowed.as_deref())
            }
            PolicyKind::Table { features, probs } => {
                argmax_allowed(&probs[features.active(&o).expect("tile features")], None)
            }
            PolicyKind::Uniform => 0,
        }
    }

    /// Full action distribution including epsilon.
    pub fn action_probs(&self, obs: &[f64]) -> Vec<f64> {
        let k = self.n_actions() as f64;
        self.base_probs(obs).iter().map(|p| (1.0 - self.epsilon) * p + self.epsilon / k).collect()
    }

    pub fn act_index(&mut self, obs: &[f64]) -> usize {
        let k = self.n_actions();
        let explore = matches!(self.kind, PolicyKind::Uniform) || (self.epsilon > 0.0 && self.rng.random_bool(self.epsilon));
        if explore {
            return self.rng.random_range(0..k);
        }
        match &self.kind {
            PolicyKind::Table { .. } => {
                let p = self.base_probs(obs);
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        return i;
                    }
                }
                k - 1
            }
            _ => self.greedy_index(obs),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Policy = serde_json::from_str(s)?;
        if p.format_version != POLICY_FORMAT {
            return Err(Error::Version { line: 1, found: p.format_version, expected: POLICY_FORMAT.into() });
        }
        Ok(p)
    }
}

impl Actor for Policy {
    fn act(&mut self, input: &[f64]) -> Result<ActValue> {
        let i = self.act_index(input);
        Ok(self.action_grid[i].clone())
    }

    fn reseed(&mut self, seed: u64) {
        Policy::reseed(self, seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, TileDim};

    fn q() -> QFunction {
        let f = FeatureMap::new(FeatureKind::Tile { dims: vec![TileDim::Linear { index: 0, low: 0.0, high: 2.0, bins: 2 }] }, 2).unwrap();
        let mut q = QFunction::zeros(f, 3, 0.9).unwrap();
        q.weights = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.5]];
        q
    }

    fn grid() -> Vec<ActValue> {
        (0..3).map(ActValue::Discrete).collect()
    }

    #[test]
    fn greedy_and_mask() {
        let p = Policy::greedy(q(), grid());
        assert_eq!(p.greedy_index(&[0.5, 9.0]), 0);
        assert_eq!(p.greedy_index(&[1.5, 9.0]), 1);
        let masked = Policy::greedy(q(), grid()).with_mask(vec![0]);
        assert_eq!(masked.greedy_index(&[1.5, 9.0]), 0);
    }

    #[test]
    fn epsilon_probs_sum_to_one() {
        let p = Policy::greedy(q(), grid()).with_epsilon(0.3);
        let probs = p.action_probs(&[1.5, 0.0]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((probs[1] - 0.8).abs() < 1e-12);
        assert_eq!(Policy::uniform(grid()).action_probs(&[0.0, 0.0]), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn selected_actions_stay_on_grid_and_match_probs() {
        let mut p = Policy::greedy(q(), grid()).with_epsilon(0.3);
        p.reseed(1);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[p.act_index(&[1.5, 0.0])] += 1;
        }
        assert!((counts[1] as f64 / n as f64 - 0.8).abs() < 0.01);
    }

    #[test]
    fn json_round_trip() {
        let p = Policy::greedy(q(), grid()).with_epsilon(0.1).with_mask(vec![1]);
        let back = Policy::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
    }
}
