use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, ActValue, ActionSpace, Environment, EpisodeClock, ObsVec, StateVec, StepResult};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_DYNAMICS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub gravity: f64,
    pub friction: f64,
    pub mass: f64,
    pub length: f64,
    pub torque_limit: f64,
    pub dt: f64,
    pub horizon: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            gravity: 9.81,
            friction: 0.05,
            mass: 1.0,
            length: 1.0,
            torque_limit: 2.0,
            dt: 0.05,
            horizon: 200,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("mass", self.mass),
            ("length", self.length),
            ("torque_limit", self.torque_limit),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::InvalidParam(format!("friction must be >= 0, got {}", self.friction)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParam("horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "gravity" => self.gravity = value,
            "friction" => self.friction = value,
            "mass" => self.mass = value,
            "length" => self.length = value,
            "torque_limit" => self.torque_limit = value,
            "dt" => self.dt = value,
            "horizon" => self.horizon = value as usize,
            _ => {
                return Err(Error::UnknownParam { env: "pendulum".into(), name: name.into() });
            }
        }
        self.validate()
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        [
            ("gravity", self.gravity),
            ("friction", self.friction),
            ("mass", self.mass),
            ("length", self.length),
            ("torque_limit", self.torque_limit),
            ("dt", self.dt),
            ("horizon", self.horizon as f64),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// One semi-implicit Euler step. `theta = 0` is upright.
pub fn pendulum_step(state: (f64, f64), torque: f64, params: &PendulumParams) -> Result<((f64, f64), f64)> {
    let (theta, omega) = state;
    check_finite(&[theta, omega, torque], "pendulum state")?;
    let theta = normalize_angle(theta);
    let u = torque.clamp(-params.torque_limit, params.torque_limit);
    // -(g/l) sin(theta + pi) written as (g/l) sin(theta) so the upright
    // equilibrium is an exact fixed point in floating point.
    let accel = (params.gravity / params.length) * theta.sin() + u / (params.mass * params.length * params.length)
        - params.friction * omega;
    let omega2 = omega + params.dt * accel;
    let theta2 = normalize_angle(theta + params.dt * omega2);
    let reward = -(theta2 * theta2 + 0.1 * omega2 * omega2 + 0.001 * u * u);
    Ok(((theta2, omega2), reward))
}

pub fn observe(theta: f64, omega: f64) -> Vec<f64> {
    vec![theta.cos(), theta.sin(), omega]
}

/// Continuous pendulum swing-up with a single torque input.
#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    theta: f64,
    omega: f64,
    rng: Option<ChaCha8Rng>,
    clock: EpisodeClock,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(Pendulum { params, theta: 0.0, omega: 0.0, rng: None, clock: EpisodeClock::default() })
    }

    pub fn params_ref(&self) -> &PendulumParams {
        &self.params
    }

    /// Raw (theta, omega).
    pub fn angle_state(&self) -> (f64, f64) {
        (self.theta, self.omega)
    }

    /// Start an episode from an explicit state instead of a random draw.
    pub fn reset_to(&mut self, theta: f64, omega: f64) -> Result<ObsVec> {
        check_finite(&[theta, omega], "pendulum state")?;
        self.theta = normalize_angle(theta);
        self.omega = omega;
        self.clock.begin();
        Ok(ObsVec(observe(self.theta, self.omega)))
    }
}

impl Environment for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { low: vec![-self.params.torque_limit], high: vec![self.params.torque_limit] }
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        if let Some(s) = seed {
            self.rng = Some(rng_for(s, STREAM_DYNAMICS));
        }
        let rng = self.rng.as_mut().ok_or(Error::Unseeded)?;
        let theta = normalize_angle(rng.random_range(-PI..PI));
        let omega = rng.random_range(-1.0..=1.0);
        self.reset_to(theta, omega)
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        self.clock.check_can_step()?;
        let torque = match self.action_space().validate(action)? {
            ActValue::Continuous(v) => v[0],
            ActValue::Discrete(_) => unreachable!(),
        };
        let ((theta, omega), reward) = pendulum_step((self.theta, self.omega), torque, &self.params)?;
        self.theta = theta;
        self.omega = omega;
        let done = self.clock.tick(self.params.horizon);
        self.clock.done = done;
        Ok(StepResult { obs: ObsVec(observe(theta, omega)), reward, done })
    }

    fn full_state(&self) -> StateVec {
        StateVec(observe(self.theta, self.omega))
    }

    fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let mut p = self.params.clone();
        p.set(name, value)?;
        self.params = p;
        Ok(())
    }

    fn params(&self) -> BTreeMap<String, f64> {
        self.params.to_map()
    }
}
