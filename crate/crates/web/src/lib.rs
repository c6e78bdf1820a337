//! wasm-bindgen entry points for the static explorer page in `www/`.
//! Every call takes plain numbers and returns a JSON string.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use hybench::envs::bandit::BanditSpec;
use hybench::envs::pendulum::{pendulum_step, PendulumParams};
use hybench::envs::windygrid::WindyGridParams;
use hybench::oracle::{start_value, value_iteration, BanditAnalysis, BehaviorPolicy, TabularModel};

fn percent(p: u32) -> Result<Ratio<i64>, String> {
    if p > 100 {
        return Err(format!("{p}% is not a probability"));
    }
    Ok(Ratio::new(p as i64, 100))
}

#[derive(Serialize)]
struct BanditView {
    true_values: [f64; 2],
    naive_estimates: [f64; 2],
    /// Exact fractions as "n/d".
    true_exact: [String; 2],
    naive_exact: [String; 2],
    true_best: usize,
    naive_best: usize,
}

/// Exact true and naively logged arm values of the two-context bandit.
///
/// Arguments are percentages: `P(z=0)`, the reward rates `r[z][a]`, and
/// the logging policy's chance of playing a1 in each context.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn bandit_explore(
    p_z0: u32,
    r00: u32,
    r01: u32,
    r10: u32,
    r11: u32,
    play_a1_z0: u32,
    play_a1_z1: u32,
) -> Result<String, String> {
    let spec = BanditSpec {
        p_z0: percent(p_z0)?,
        reward_table: [[percent(r00)?, percent(r01)?], [percent(r10)?, percent(r11)?]],
    };
    let one = Ratio::from_integer(1);
    let (b0, b1) = (percent(play_a1_z0)?, percent(play_a1_z1)?);
    let behavior = BehaviorPolicy { pi: [[one - b0, b0], [one - b1, b1]] };
    let a = BanditAnalysis::new(&spec, &behavior).map_err(|e| e.to_string())?;
    let view = BanditView {
        true_values: a.true_values.map(|v| v.to_f64().unwrap_or(f64::NAN)),
        naive_estimates: a.confounded_estimates.map(|v| v.to_f64().unwrap_or(f64::NAN)),
        true_exact: a.true_values.map(|v| v.to_string()),
        naive_exact: a.confounded_estimates.map(|v| v.to_string()),
        true_best: a.true_argmax,
        naive_best: a.confounded_argmax,
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[derive(Serialize, Debug)]
pub struct Trajectories {
    pub torque: Vec<f64>,
    pub theta_true: Vec<f64>,
    pub theta_sim: Vec<f64>,
    /// One-step prediction error of the simulator from each true state.
    pub one_step_error: Vec<f64>,
}

/// Swing-up torques chosen on the true pendulum, replayed open loop in a
/// simulator with different gravity and mass.
pub fn pendulum_trajectories(
    gravity_sim: f64,
    mass_sim: f64,
    steps: usize,
    theta0: f64,
) -> Result<Trajectories, String> {
    let truth = PendulumParams::default();
    let sim = PendulumParams { gravity: gravity_sim, mass: mass_sim, ..PendulumParams::default() };
    sim.validate().map_err(|e| e.to_string())?;
    let mut out = Trajectories { torque: vec![], theta_true: vec![], theta_sim: vec![], one_step_error: vec![] };
    let (mut real, mut simulated) = ((theta0, 0.0), (theta0, 0.0));
    for _ in 0..steps {
        // pump energy while low, brake near the top
        let upright = real.0.cos() > 0.9;
        let u = if upright { -2.0 * real.0.sin() - 0.5 * real.1 } else if real.1 >= 0.0 { 2.0 } else { -2.0 };
        let step = |s, p: &PendulumParams| pendulum_step(s, u, p).map(|r| r.0).map_err(|e| e.to_string());
        let next_real = step(real, &truth)?;
        let from_real = step(real, &sim)?;
        out.one_step_error.push(angle_gap(next_real.0, from_real.0).hypot(next_real.1 - from_real.1));
        simulated = step(simulated, &sim)?;
        real = next_real;
        out.torque.push(u.clamp(-truth.torque_limit, truth.torque_limit));
        out.theta_true.push(real.0);
        out.theta_sim.push(simulated.0);
    }
    Ok(out)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

#[wasm_bindgen]
pub fn pendulum_explore(gravity_sim: f64, mass_sim: f64, steps: u32, theta0: f64) -> Result<String, String> {
    let t = pendulum_trajectories(gravity_sim, mass_sim, steps as usize, theta0)?;
    Ok(serde_json::to_string(&t).expect("trajectories serialize"))
}

#[derive(Serialize, Debug)]
pub struct ValueMap {
    pub width: usize,
    pub height: usize,
    /// `values[y][x]`, averaged over the wind state with its stationary weights.
    pub values: Vec<Vec<f64>>,
    /// Greedy action in calm weather: 0 up, 1 down, 2 left, 3 right.
    pub calm_action: Vec<Vec<usize>>,
    pub windy_action: Vec<Vec<usize>>,
    pub start_value: f64,
}

pub fn windygrid_values(wind_prob: f64, goal_x: usize, goal_y: usize, gamma: f64) -> Result<ValueMap, String> {
    let p = WindyGridParams { wind_prob, goal: (goal_x, goal_y), ..WindyGridParams::default() };
    let m = TabularModel::windygrid(&p).map_err(|e| e.to_string())?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(format!("discount {gamma} must lie in [0, 1)"));
    }
    let (v, pi) = value_iteration(&m, gamma, 1e-10).map_err(|e| e.to_string())?;
    let grid = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..p.height).map(|y| (0..p.width).map(|x| f(x, y)).collect()).collect()
    };
    let at = |x, y, w| p.state_index((x, y), w);
    let values = grid(&|x, y| (1.0 - wind_prob) * v[at(x, y, 0)] + wind_prob * v[at(x, y, 1)]);
    let action = |w: u8| (0..p.height).map(|y| (0..p.width).map(|x| pi[at(x, y, w)]).collect()).collect();
    let start_value = start_value(&m, &v);
    Ok(ValueMap { width: p.width, height: p.height, values, calm_action: action(0), windy_action: action(1), start_value })
}

#[wasm_bindgen]
pub fn windygrid_explore(wind_prob: f64, goal_x: u32, goal_y: u32, gamma: f64) -> Result<String, String> {
    let map = windygrid_values(wind_prob, goal_x as usize, goal_y as usize, gamma)?;
    Ok(serde_json::to_string(&map).expect("value map serializes"))
}
