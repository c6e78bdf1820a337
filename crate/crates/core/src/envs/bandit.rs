//! Two-action bandit with a binary context `z` that the reward depends on.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActValue, ActionSpace, Environment, EpisodeClock, ObsVec, StateVec, StepResult};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_DYNAMICS};

pub type Prob = Ratio<i64>;

/// `reward_table[z][a] = P(r = 1 | z, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSpec {
    pub p_z0: Prob,
    pub reward_table: [[Prob; 2]; 2],
}

impl BanditSpec {
    /// P(z=0) = 1/3; z=1 rewards a1 with 1/2 and a0 with 1/3, z=0 rewards
    /// a1 with 1/4 and a0 with 1/6.
    pub fn confounded() -> Self {
        let r = |n, d| Ratio::new(n, d);
        BanditSpec { p_z0: r(1, 3), reward_table: [[r(1, 6), r(1, 4)], [r(1, 3), r(1, 2)]] }
    }

    pub fn uniform(p: Prob) -> Self {
        BanditSpec { p_z0: Ratio::new(1, 2), reward_table: [[p, p], [p, p]] }
    }

    pub fn p_z(&self) -> [Prob; 2] {
        [self.p_z0, Prob::one() - self.p_z0]
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: &Prob| *p >= Prob::zero() && *p <= Prob::one();
        if !in_unit(&self.p_z0) || !self.reward_table.iter().flatten().all(in_unit) {
            return Err(Error::InvalidParam("bandit probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let p = Ratio::approximate_float(value)
            .ok_or_else(|| Error::InvalidParam(format!("{name} = {value} is not representable")))?;
        let slot = match name {
            "p_z0" => &mut self.p_z0,
            "r_z0_a0" => &mut self.reward_table[0][0],
            "r_z0_a1" => &mut self.reward_table[0][1],
            "r_z1_a0" => &mut self.reward_table[1][0],
            "r_z1_a1" => &mut self.reward_table[1][1],
            _ => return Err(Error::UnknownParam { env: "bandit".into(), name: name.into() }),
        };
        *slot = p;
        self.validate()
    }

    fn to_map(&self) -> BTreeMap<String, f64> {
        let f = |p: &Prob| p.to_f64().unwrap_or(f64::NAN);
        [
            ("p_z0", f(&self.p_z0)),
            ("r_z0_a0", f(&self.reward_table[0][0])),
            ("r_z0_a1", f(&self.reward_table[0][1])),
            ("r_z1_a0", f(&self.reward_table[1][0])),
            ("r_z1_a1", f(&self.reward_table[1][1])),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// One Bernoulli reward draw for context `z` and action index `action`.
pub fn bandit_pull<R: Rng + ?Sized>(z: usize, action: usize, spec: &BanditSpec, rng: &mut R) -> u8 {
    let p = spec.reward_table[z][action].to_f64().unwrap_or(0.0);
    rng.random_bool(p.clamp(0.0, 1.0)) as u8
}

pub fn sample_context<R: Rng + ?Sized>(spec: &BanditSpec, rng: &mut R) -> usize {
    let p0 = spec.p_z0.to_f64().unwrap_or(0.0);
    if rng.random_bool(p0.clamp(0.0, 1.0)) {
        0
    } else {
        1
    }
}

/// Single-decision episodes: empty observation, full state `(z)`.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    spec: BanditSpec,
    z: usize,
    rng: Option<ChaCha8Rng>,
    clock: EpisodeClock,
}

impl BanditEnv {
    pub fn new(spec: BanditSpec) -> Self {
        BanditEnv { spec, z: 0, rng: None, clock: EpisodeClock::default() }
    }

    pub fn spec(&self) -> &BanditSpec {
        &self.spec
    }
}

impl Environment for BanditEnv {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn obs_dim(&self) -> usize {
        0
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn horizon(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        if let Some(s) = seed {
            self.rng = Some(rng_for(s, STREAM_DYNAMICS));
        }
        let rng = self.rng.as_mut().ok_or(Error::Unseeded)?;
        self.z = sample_context(&self.spec, rng);
        self.clock.begin();
        Ok(ObsVec(Vec::new()))
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        self.clock.check_can_step()?;
        let a = match self.action_space().validate(action)? {
            ActValue::Discrete(i) => i,
            ActValue::Continuous(_) => unreachable!(),
        };
        let rng = self.rng.as_mut().ok_or(Error::Unseeded)?;
        let r = bandit_pull(self.z, a, &self.spec, rng);
        self.clock.tick(1);
        self.clock.done = true;
        Ok(StepResult { obs: ObsVec(Vec::new()), reward: r as f64, done: true })
    }

    fn full_state(&self) -> StateVec {
        StateVec(vec![self.z as f64])
    }

    fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let mut s = self.spec.clone();
        s.set(name, value)?;
        self.spec = s;
        Ok(())
    }

    fn params(&self) -> BTreeMap<String, f64> {
        self.spec.to_map()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn empirical(z: usize, a: usize, spec: &BanditSpec, n: usize) -> f64 {
        let mut rng = rng_for(11, 99);
        (0..n).map(|_| bandit_pull(z, a, spec, &mut rng) as f64).sum::<f64>() / n as f64
    }

    #[test]
    fn empirical_rates_match_table() {
        let spec = BanditSpec::confounded();
        let n = 1_000_000;
        // 3 sigma of a Bernoulli mean at n = 1e6 is below 0.0016
        assert!((empirical(1, 1, &spec, n) - 0.5).abs() < 0.002);
        assert!((empirical(0, 0, &spec, n) - 1.0 / 6.0).abs() < 0.002);
        for (z, a, p) in [(1, 0, 1.0 / 3.0), (0, 1, 0.25)] {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((empirical(z, a, &spec, n) - p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn zero_table_never_rewards() {
        let spec = BanditSpec::uniform(Ratio::new(0, 1));
        assert_eq!(empirical(0, 1, &spec, 10_000), 0.0);
    }

    #[test]
    fn env_episode_is_single_step() {
        let mut env = BanditEnv::new(BanditSpec::confounded());
        let obs = env.reset(Some(3)).unwrap();
        assert!(obs.is_empty());
        assert_eq!(env.full_state().len(), 1);
        let s = env.step(&ActValue::Discrete(1)).unwrap();
        assert!(s.done);
        assert!(env.step(&ActValue::Discrete(1)).is_err());
    }

    #[test]
    fn params_override() {
        let mut env = BanditEnv::new(BanditSpec::confounded());
        env.set_param("r_z0_a0", 0.5).unwrap();
        assert_eq!(env.spec().reward_table[0][0], Ratio::new(1, 2));
        assert!(env.set_param("r_z0_a0", 1.5).is_err());
    }
}
