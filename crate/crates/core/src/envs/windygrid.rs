use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActValue, ActionSpace, Environment, EpisodeClock, ObsVec, StateVec, StepResult};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_DYNAMICS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

    pub fn from_index(i: usize) -> Option<GridAction> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, 1),
            GridAction::Down => (0, -1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindyGridParams {
    pub width: usize,
    pub height: usize,
    pub wind_prob: f64,
    pub goal: (usize, usize),
    pub start: (usize, usize),
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for WindyGridParams {
    fn default() -> Self {
        WindyGridParams {
            width: 5,
            height: 5,
            wind_prob: 0.4,
            goal: (4, 4),
            start: (0, 0),
            step_penalty: -1.0,
            goal_reward: 10.0,
            horizon: 50,
            discount: 0.95,
        }
    }
}

impl WindyGridParams {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParam("grid must be at least 1x1".into()));
        }
        for (what, (x, y)) in [("start", self.start), ("goal", self.goal)] {
            if x >= self.width || y >= self.height {
                return Err(Error::InvalidParam(format!("{what} ({x}, {y}) outside the grid")));
            }
        }
        if self.start == self.goal {
            return Err(Error::InvalidParam("start must differ from goal".into()));
        }
        if !(0.0..=1.0).contains(&self.wind_prob) {
            return Err(Error::InvalidParam(format!("wind_prob must lie in [0, 1], got {}", self.wind_prob)));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidParam(format!("discount must lie in (0, 1), got {}", self.discount)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParam("horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "width" => self.width = value as usize,
            "height" => self.height = value as usize,
            "wind_prob" => self.wind_prob = value,
            "goal_x" => self.goal.0 = value as usize,
            "goal_y" => self.goal.1 = value as usize,
            "start_x" => self.start.0 = value as usize,
            "start_y" => self.start.1 = value as usize,
            "step_penalty" => self.step_penalty = value,
            "goal_reward" => self.goal_reward = value,
            "horizon" => self.horizon = value as usize,
            "discount" => self.discount = value,
            _ => return Err(Error::UnknownParam { env: "windygrid".into(), name: name.into() }),
        }
        self.validate()
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        [
            ("width", self.width as f64),
            ("height", self.height as f64),
            ("wind_prob", self.wind_prob),
            ("goal_x", self.goal.0 as f64),
            ("goal_y", self.goal.1 as f64),
            ("start_x", self.start.0 as f64),
            ("start_y", self.start.1 as f64),
            ("step_penalty", self.step_penalty),
            ("goal_reward", self.goal_reward),
            ("horizon", self.horizon as f64),
            ("discount", self.discount),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Number of (x, y, wind) states.
    pub fn n_states(&self) -> usize {
        self.width * self.height * 2
    }

    pub fn state_index(&self, cell: (usize, usize), wind: u8) -> usize {
        (cell.1 * self.width + cell.0) * 2 + wind as usize
    }

    pub fn state_of(&self, index: usize) -> ((usize, usize), u8) {
        let wind = (index % 2) as u8;
        let c = index / 2;
        ((c % self.width, c / self.width), wind)
    }

    /// Map a (possibly continuous) observation onto the nearest in-bounds state.
    pub fn snap(&self, obs: &[f64]) -> ((usize, usize), u8) {
        let clampi = |v: f64, n: usize| -> usize {
            let r = v.round();
            if r.is_nan() || r < 0.0 {
                0
            } else {
                (r as usize).min(n - 1)
            }
        };
        let x = clampi(obs[0], self.width);
        let y = clampi(obs[1], self.height);
        let w = clampi(obs.get(2).copied().unwrap_or(0.0), 2) as u8;
        ((x, y), w)
    }
}

/// Deterministic part of a transition: move, then an extra downward push
/// when the current wind is on. Walls clamp both.
pub fn windygrid_step(
    cell: (i64, i64),
    wind: u8,
    action: GridAction,
    params: &WindyGridParams,
) -> Result<((usize, usize), f64, bool)> {
    if !params.in_bounds(cell.0, cell.1) {
        return Err(Error::OutOfBounds { x: cell.0, y: cell.1, width: params.width, height: params.height });
    }
    let (dx, dy) = action.delta();
    let x = (cell.0 + dx).clamp(0, params.width as i64 - 1);
    let mut y = (cell.1 + dy).clamp(0, params.height as i64 - 1);
    if wind == 1 {
        y = (y - 1).max(0);
    }
    let next = (x as usize, y as usize);
    if next == params.goal {
        Ok((next, params.goal_reward, true))
    } else {
        Ok((next, params.step_penalty, false))
    }
}

/// Windy gridworld whose per-step wind is the hidden variable.
#[derive(Debug, Clone)]
pub struct WindyGrid {
    params: WindyGridParams,
    cell: (usize, usize),
    wind: u8,
    rng: Option<ChaCha8Rng>,
    clock: EpisodeClock,
}

impl WindyGrid {
    pub fn new(params: WindyGridParams) -> Result<Self> {
        params.validate()?;
        let start = params.start;
        Ok(WindyGrid { params, cell: start, wind: 0, rng: None, clock: EpisodeClock::default() })
    }

    pub fn params_ref(&self) -> &WindyGridParams {
        &self.params
    }

    fn obs(&self) -> ObsVec {
        ObsVec(vec![self.cell.0 as f64, self.cell.1 as f64, self.wind as f64])
    }

    fn draw_wind(&mut self) -> Result<u8> {
        let p = self.params.wind_prob;
        let rng = self.rng.as_mut().ok_or(Error::Unseeded)?;
        Ok(rng.random_bool(p) as u8)
    }
}

impl Environment for WindyGrid {
    fn name(&self) -> &'static str {
        "windygrid"
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<ObsVec> {
        if let Some(s) = seed {
            self.rng = Some(rng_for(s, STREAM_DYNAMICS));
        }
        self.cell = self.params.start;
        self.wind = self.draw_wind()?;
        self.clock.begin();
        Ok(self.obs())
    }

    fn step(&mut self, action: &ActValue) -> Result<StepResult> {
        self.clock.check_can_step()?;
        let a = match self.action_space().validate(action)? {
            ActValue::Discrete(i) => GridAction::from_index(i).expect("validated"),
            ActValue::Continuous(_) => unreachable!(),
        };
        let (next, reward, reached) =
            windygrid_step((self.cell.0 as i64, self.cell.1 as i64), self.wind, a, &self.params)?;
        self.cell = next;
        self.wind = self.draw_wind()?;
        let timeout = self.clock.tick(self.params.horizon);
        self.clock.done = reached || timeout;
        Ok(StepResult { obs: self.obs(), reward, done: self.clock.done })
    }

    fn full_state(&self) -> StateVec {
        StateVec(self.obs().0)
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
