use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::bandit::{bandit_pull, sample_context, BanditSpec, Prob};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_DYNAMICS, STREAM_POLICY};

/// Behavior policy `pi[z][a]` of the bandit's data collector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicy {
    pub pi: [[Prob; 2]; 2],
}

impl BehaviorPolicy {
    /// Sees `z`: plays a1 when z = 0 and a0 when z = 1.
    pub fn confounding() -> Self {
        let (zero, one) = (Ratio::from_integer(0), Ratio::from_integer(1));
        BehaviorPolicy { pi: [[zero, one], [one, zero]] }
    }

    pub fn uniform() -> Self {
        let h = Ratio::new(1, 2);
        BehaviorPolicy { pi: [[h, h], [h, h]] }
    }

    fn sample<R: Rng + ?Sized>(&self, z: usize, rng: &mut R) -> usize {
        let p1 = self.pi[z][1].to_f64().unwrap_or(0.0).clamp(0.0, 1.0);
        rng.random_bool(p1) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditAnalysis {
    pub true_values: [Prob; 2],
    pub confounded_estimates: [Prob; 2],
    pub true_argmax: usize,
    pub confounded_argmax: usize,
    pub bias_gap: [Prob; 2],
}

impl BanditAnalysis {
    pub fn new(spec: &BanditSpec, behavior: &BehaviorPolicy) -> Result<Self> {
        let t = bandit_true_values(spec)?;
        let c = bandit_confounded_estimates(spec, behavior)?;
        let gap = |a: usize| if t[a] > c[a] { t[a] - c[a] } else { c[a] - t[a] };
        Ok(BanditAnalysis {
            true_values: t,
            confounded_estimates: c,
            true_argmax: argmax(&t),
            confounded_argmax: argmax(&c),
            bias_gap: [gap(0), gap(1)],
        })
    }
}

fn argmax(v: &[Prob; 2]) -> usize {
    usize::from(v[1] > v[0])
}

/// `E_z P(r = 1 | z, a)` for each action.
pub fn bandit_true_values(spec: &BanditSpec) -> Result<[Prob; 2]> {
    spec.validate()?;
    let pz = spec.p_z();
    let v = |a: usize| pz[0] * spec.reward_table[0][a] + pz[1] * spec.reward_table[1][a];
    Ok([v(0), v(1)])
}

/// `P(r = 1 | a)` under data collected by `behavior`.
pub fn bandit_confounded_estimates(spec: &BanditSpec, behavior: &BehaviorPolicy) -> Result<[Prob; 2]> {
    spec.validate()?;
    let pz = spec.p_z();
    let mut out = [Prob::zero(); 2];
    for (a, slot) in out.iter_mut().enumerate() {
        let mass = pz[0] * behavior.pi[0][a] + pz[1] * behavior.pi[1][a];
        if mass.is_zero() {
            return Err(Error::UndefinedEstimand(a));
        }
        let joint = pz[0] * behavior.pi[0][a] * spec.reward_table[0][a]
            + pz[1] * behavior.pi[1][a] * spec.reward_table[1][a];
        *slot = joint / mass;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCheck {
    pub counts: [u64; 2],
    /// `None` for an action that was never played.
    pub means: [Option<f64>; 2],
    pub argmax: usize,
}

/// Simulate `n` logged pulls and report the naive per-action reward means.
pub fn bandit_empirical_check(spec: &BanditSpec, behavior: &BehaviorPolicy, n: u64, seed: u64) -> Result<EmpiricalCheck> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    spec.validate()?;
    let mut env_rng = rng_for(seed, STREAM_DYNAMICS);
    let mut pol_rng = rng_for(seed, STREAM_POLICY);
    let mut counts = [0u64; 2];
    let mut hits = [0u64; 2];
    for _ in 0..n {
        let z = sample_context(spec, &mut env_rng);
        let a = behavior.sample(z, &mut pol_rng);
        counts[a] += 1;
        hits[a] += bandit_pull(z, a, spec, &mut env_rng) as u64;
    }
    let means = [0, 1].map(|a| (counts[a] > 0).then(|| hits[a] as f64 / counts[a] as f64));
    let argmax = match means {
        [Some(m0), Some(m1)] => usize::from(m1 > m0),
        [None, _] => 1,
        _ => 0,
    };
    Ok(EmpiricalCheck { counts, means, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Prob {
        Ratio::new(n, d)
    }

    #[test]
    fn true_values_are_exact() {
        let t = bandit_true_values(&BanditSpec::confounded()).unwrap();
        // hand expectation: 1/3*1/6 + 2/3*1/3 and 1/3*1/4 + 2/3*1/2
        assert_eq!(t, [r(1, 3) * r(1, 6) + r(2, 3) * r(1, 3), r(1, 3) * r(1, 4) + r(2, 3) * r(1, 2)]);
        assert_eq!(t, [r(5, 18), r(5, 12)]);
        assert_eq!(bandit_true_values(&BanditSpec::uniform(r(2, 7))).unwrap(), [r(2, 7), r(2, 7)]);
    }

    #[test]
    fn confounded_estimates_reverse_the_argmax() {
        let a = BanditAnalysis::new(&BanditSpec::confounded(), &BehaviorPolicy::confounding()).unwrap();
        assert_eq!(a.confounded_estimates, [r(1, 3), r(1, 4)]);
        assert_eq!((a.true_argmax, a.confounded_argmax), (1, 0));
        assert_eq!(a.bias_gap, [r(1, 18), r(1, 6)]);
    }

    #[test]
    fn independent_behavior_has_no_bias() {
        let spec = BanditSpec::confounded();
        let b = BehaviorPolicy { pi: [[r(1, 5), r(4, 5)], [r(1, 5), r(4, 5)]] };
        assert_eq!(bandit_confounded_estimates(&spec, &b).unwrap(), bandit_true_values(&spec).unwrap());
    }

    #[test]
    fn unsupported_action_is_undefined() {
        let b = BehaviorPolicy { pi: [[r(1, 1), r(0, 1)], [r(1, 1), r(0, 1)]] };
        assert!(matches!(bandit_confounded_estimates(&BanditSpec::confounded(), &b), Err(Error::UndefinedEstimand(1))));
    }

    #[test]
    fn empirical_check_is_seeded() {
        let spec = BanditSpec::confounded();
        let a = bandit_empirical_check(&spec, &BehaviorPolicy::confounding(), 1000, 5).unwrap();
        let b = bandit_empirical_check(&spec, &BehaviorPolicy::confounding(), 1000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts[0] + a.counts[1], 1000);
    }
}
