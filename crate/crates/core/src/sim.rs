//! One-step simulators that start from an observation. These are the
//! `T_sim(o, a)` anchors for the correction models.

use crate::envs::pendulum::{observe, pendulum_step, PendulumParams};
use crate::envs::windygrid::{windygrid_step, GridAction, WindyGridParams};
use crate::envs::{ActValue, EnvConfig, EnvName};
use crate::error::{Error, Result};
use crate::perturb::PerturbSpec;

pub trait Simulator: Send + Sync {
    fn obs_dim(&self) -> usize;
    /// Expected next observation after taking `action` from the state behind `obs`.
    fn predict(&self, obs: &[f64], action: &ActValue) -> Result<Vec<f64>>;
}

fn continuous(action: &ActValue) -> Result<f64> {
    match action {
        ActValue::Continuous(v) if v.len() == 1 => Ok(v[0]),
        _ => Err(Error::InvalidAction(action.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct PendulumSim {
    pub params: PendulumParams,
}

impl Simulator for PendulumSim {
    fn obs_dim(&self) -> usize {
        3
    }

    /// The angle comes from `atan2(sin, cos)` and the velocity is read
    /// directly, so a zeroed velocity entry is taken as a resting pendulum.
    fn predict(&self, obs: &[f64], action: &ActValue) -> Result<Vec<f64>> {
        let (c, s, w) = (obs[0], obs[1], obs[2]);
        if c * c + s * s < 1e-12 {
            return Err(Error::NotInvertible("cos and sin entries are both zero".into()));
        }
        let ((th, om), _) = pendulum_step((s.atan2(c), w), continuous(action)?, &self.params)?;
        Ok(observe(th, om))
    }
}

#[derive(Debug, Clone)]
pub struct WindyGridSim {
    pub params: WindyGridParams,
}

impl Simulator for WindyGridSim {
    fn obs_dim(&self) -> usize {
        3
    }

    /// Position after the move and push; the wind entry becomes its expectation.
    fn predict(&self, obs: &[f64], action: &ActValue) -> Result<Vec<f64>> {
        let p = &self.params;
        let (cell, wind) = p.snap(obs);
        let a = match action {
            ActValue::Discrete(i) => GridAction::from_index(*i).ok_or_else(|| Error::InvalidAction(action.to_string()))?,
            _ => return Err(Error::InvalidAction(action.to_string())),
        };
        let next = if cell == p.goal {
            cell
        } else {
            windygrid_step((cell.0 as i64, cell.1 as i64), wind, a, p)?.0
        };
        Ok(vec![next.0 as f64, next.1 as f64, p.wind_prob])
    }
}

/// Predicts all zeros: a simulator that knows nothing.
#[derive(Debug, Clone)]
pub struct ZeroSim {
    pub dim: usize,
}

impl Simulator for ZeroSim {
    fn obs_dim(&self) -> usize {
        self.dim
    }
    fn predict(&self, _obs: &[f64], _action: &ActValue) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.dim])
    }
}

/// Adds a constant offset to another simulator's prediction.
pub struct BiasedSim {
    pub inner: Box<dyn Simulator>,
    pub bias: Vec<f64>,
}

impl Simulator for BiasedSim {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }
    fn predict(&self, obs: &[f64], action: &ActValue) -> Result<Vec<f64>> {
        let mut o = self.inner.predict(obs, action)?;
        for (v, b) in o.iter_mut().zip(&self.bias) {
            *v += b;
        }
        Ok(o)
    }
}

struct Masked {
    inner: Box<dyn Simulator>,
    hidden: Vec<usize>,
}

impl Simulator for Masked {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }
    fn predict(&self, obs: &[f64], action: &ActValue) -> Result<Vec<f64>> {
        let mut o = self.inner.predict(obs, action)?;
        for &i in &self.hidden {
            o[i] = 0.0;
        }
        Ok(o)
    }
}

/// Simulator for an environment config with sim2real perturbations.
///
/// Parameter overrides change the dynamics and hidden dims zero the
/// prediction. Zero-mean noise perturbations leave the expected next
/// observation unchanged and are ignored; action delay has no one-step
/// form and is rejected.
pub fn simulator_for(cfg: &EnvConfig, perturbs: &[PerturbSpec]) -> Result<Box<dyn Simulator>> {
    let mut params = cfg.params.clone();
    let mut hidden = Vec::new();
    for p in perturbs {
        match p {
            PerturbSpec::TransitionParamOverride { overrides } => params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v))),
            PerturbSpec::HiddenDims { indices } => hidden.extend(indices.iter().copied()),
            PerturbSpec::ObsNoise { .. } | PerturbSpec::ActionNoise { .. } => {}
            PerturbSpec::ActionDelay { steps } if *steps == 0 => {}
            PerturbSpec::ActionDelay { .. } => {
                return Err(Error::NotApplicable("action delay has no one-step simulator".into()));
            }
        }
    }
    let sim: Box<dyn Simulator> = match cfg.name {
        EnvName::Pendulum => {
            let mut p = PendulumParams::default();
            for (k, v) in &params {
                p.set(k, *v)?;
            }
            Box::new(PendulumSim { params: p })
        }
        EnvName::Windygrid => {
            let mut p = WindyGridParams::default();
            for (k, v) in &params {
                p.set(k, *v)?;
            }
            Box::new(WindyGridSim { params: p })
        }
        EnvName::Bandit => return Err(Error::NotApplicable("the bandit has no state to simulate".into())),
    };
    if let Some(&i) = hidden.iter().find(|&&i| i >= sim.obs_dim()) {
        return Err(Error::IndexOutOfRange { index: i, dim: sim.obs_dim() });
    }
    Ok(if hidden.is_empty() { sim } else { Box::new(Masked { inner: sim, hidden }) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Environment, Pendulum};

    #[test]
    fn perfect_pendulum_sim_matches_env() {
        let mut env = Pendulum::new(PendulumParams::default()).unwrap();
        let sim = simulator_for(&EnvConfig::new(EnvName::Pendulum), &[]).unwrap();
        let mut o = env.reset(Some(4)).unwrap();
        for k in 0..50 {
            let a = ActValue::Continuous(vec![((k as f64) * 0.37).sin() * 2.0]);
            let pred = sim.predict(&o, &a).unwrap();
            let step = env.step(&a).unwrap();
            for (p, t) in pred.iter().zip(step.obs.iter()) {
                assert!((p - t).abs() < 1e-12);
            }
            o = step.obs;
        }
    }

    #[test]
    fn windygrid_sim_moves_and_expects_wind() {
        let sim = simulator_for(&EnvConfig::new(EnvName::Windygrid).with("wind_prob", 0.3), &[]).unwrap();
        assert_eq!(sim.predict(&[0.0, 0.0, 0.0], &ActValue::Discrete(3)).unwrap(), vec![1.0, 0.0, 0.3]);
        assert_eq!(sim.predict(&[1.0, 2.0, 1.0], &ActValue::Discrete(0)).unwrap(), vec![1.0, 2.0, 0.3]);
    }

    #[test]
    fn degenerate_inputs() {
        let sim = simulator_for(&EnvConfig::new(EnvName::Pendulum), &[]).unwrap();
        assert!(matches!(sim.predict(&[0.0, 0.0, 1.0], &ActValue::Continuous(vec![0.0])), Err(Error::NotInvertible(_))));
        let delay = [PerturbSpec::ActionDelay { steps: 1 }];
        assert!(simulator_for(&EnvConfig::new(EnvName::Pendulum), &delay).is_err());
        let hide = [PerturbSpec::HiddenDims { indices: vec![2] }];
        let sim = simulator_for(&EnvConfig::new(EnvName::Windygrid), &hide).unwrap();
        assert_eq!(sim.predict(&[0.0, 0.0, 1.0], &ActValue::Discrete(3)).unwrap()[2], 0.0);
    }
}
