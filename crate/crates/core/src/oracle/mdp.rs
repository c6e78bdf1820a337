use crate::envs::windygrid::{windygrid_step, GridAction, WindyGridParams};
use crate::envs::{EnvConfig, EnvName};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    /// No value is bootstrapped past a terminal outcome.
    pub terminal: bool,
}

pub trait DiscreteModel {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn outcomes(&self, s: usize, a: usize) -> &[Outcome];
    fn initial(&self) -> &[(usize, f64)];
}

/// Fully enumerated finite model.
#[derive(Debug, Clone)]
pub struct TabularModel {
    n_states: usize,
    n_actions: usize,
    table: Vec<Vec<Outcome>>,
    initial: Vec<(usize, f64)>,
    /// Full observation of each state, for evaluating observation-based policies.
    pub observations: Vec<Vec<f64>>,
}

impl TabularModel {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        table: Vec<Vec<Outcome>>,
        initial: Vec<(usize, f64)>,
        observations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if table.len() != n_states * n_actions {
            return Err(Error::InvalidParam("transition table size mismatch".into()));
        }
        for row in &table {
            let total: f64 = row.iter().map(|o| o.prob).sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|o| o.next >= n_states) {
                return Err(Error::InvalidParam("transition row is not a distribution over states".into()));
            }
        }
        Ok(TabularModel { n_states, n_actions, table, initial, observations })
    }

    /// States are `(x, y, wind)` indexed as in [`WindyGridParams::state_index`].
    /// The goal is absorbing with zero reward.
    pub fn windygrid(p: &WindyGridParams) -> Result<Self> {
        p.validate()?;
        let n = p.n_states();
        let mut table = Vec::with_capacity(n * 4);
        let mut observations = Vec::with_capacity(n);
        for s in 0..n {
            let (cell, wind) = p.state_of(s);
            observations.push(vec![cell.0 as f64, cell.1 as f64, wind as f64]);
            for a in GridAction::ALL {
                if cell == p.goal {
                    table.push(vec![Outcome { prob: 1.0, next: s, reward: 0.0, terminal: true }]);
                    continue;
                }
                let (next, reward, done) = windygrid_step((cell.0 as i64, cell.1 as i64), wind, a, p)?;
                let mut row = Vec::new();
                for (w, prob) in [(0u8, 1.0 - p.wind_prob), (1u8, p.wind_prob)] {
                    if prob > 0.0 {
                        row.push(Outcome { prob, next: p.state_index(next, w), reward, terminal: done });
                    }
                }
                table.push(row);
            }
        }
        let initial = [(0u8, 1.0 - p.wind_prob), (1u8, p.wind_prob)]
            .into_iter()
            .filter(|(_, q)| *q > 0.0)
            .map(|(w, q)| (p.state_index(p.start, w), q))
            .collect();
        TabularModel::new(n, 4, table, initial, observations)
    }
}

impl DiscreteModel for TabularModel {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn outcomes(&self, s: usize, a: usize) -> &[Outcome] {
        &self.table[s * self.n_actions + a]
    }
    fn initial(&self) -> &[(usize, f64)] {
        &self.initial
    }
}

/// Enumerated model of an environment config, if it has one.
pub fn model_for(cfg: &EnvConfig) -> Result<TabularModel> {
    match cfg.name {
        EnvName::Windygrid => {
            let mut p = WindyGridParams::default();
            for (k, v) in &cfg.params {
                p.set(k, *v)?;
            }
            TabularModel::windygrid(&p)
        }
        other => Err(Error::NotEnumerable(other.as_str().into())),
    }
}

fn check_discount(gamma: f64, tol: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParam(format!("discount must lie in [0, 1), got {gamma}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam(format!("tolerance must be > 0, got {tol}")));
    }
    Ok(())
}

fn q_value<M: DiscreteModel + ?Sized>(m: &M, v: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
    m.outcomes(s, a)
        .iter()
        .map(|o| o.prob * (o.reward + if o.terminal { 0.0 } else { gamma * v[o.next] }))
        .sum()
}

/// Sweeps stop once a sweep changes V by less than `tol * (1 - gamma) / gamma`,
/// which keeps the result within `tol` of the fixed point.
fn stop_threshold(gamma: f64, tol: f64) -> f64 {
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - gamma) / gamma
    }
}

/// Optimal values and a greedy policy (lowest index wins ties).
pub fn value_iteration<M: DiscreteModel + ?Sized>(m: &M, gamma: f64, tol: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    value_iteration_from(m, gamma, tol, vec![0.0; m.n_states()])
}

pub(crate) fn value_iteration_from<M: DiscreteModel + ?Sized>(
    m: &M,
    gamma: f64,
    tol: f64,
    mut v: Vec<f64>,
) -> Result<(Vec<f64>, Vec<usize>)> {
    check_discount(gamma, tol)?;
    let threshold = stop_threshold(gamma, tol);
    loop {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = (0..m.n_states())
            .map(|s| (0..m.n_actions()).map(|a| q_value(m, &v, s, a, gamma)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        for (old, new) in v.iter().zip(&next) {
            delta = delta.max((old - new).abs());
        }
        v = next;
        if delta < threshold {
            break;
        }
    }
    let policy = (0..m.n_states())
        .map(|s| {
            let mut best = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..m.n_actions() {
                let q = q_value(m, &v, s, a, gamma);
                if q > best_q + 1e-12 {
                    best = a;
                    best_q = q;
                }
            }
            best
        })
        .collect();
    Ok((v, policy))
}

/// Values of a stochastic policy given as per-state action probabilities.
pub fn exact_policy_eval<M: DiscreteModel + ?Sized>(m: &M, policy: &[Vec<f64>], gamma: f64, tol: f64) -> Result<Vec<f64>> {
    check_discount(gamma, tol)?;
    check_policy(m, policy)?;
    let threshold = stop_threshold(gamma, tol);
    let mut v = vec![0.0; m.n_states()];
    loop {
        let next: Vec<f64> = (0..m.n_states())
            .map(|s| policy[s].iter().enumerate().map(|(a, p)| if *p > 0.0 { p * q_value(m, &v, s, a, gamma) } else { 0.0 }).sum())
            .collect();
        let delta = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < threshold {
            return Ok(v);
        }
    }
}

/// Expected undiscounted return over `horizon` steps from the initial distribution.
pub fn finite_horizon_return<M: DiscreteModel + ?Sized>(m: &M, policy: &[Vec<f64>], horizon: usize) -> Result<f64> {
    check_policy(m, policy)?;
    let mut v = vec![0.0; m.n_states()];
    for _ in 0..horizon {
        v = (0..m.n_states())
            .map(|s| policy[s].iter().enumerate().map(|(a, p)| if *p > 0.0 { p * q_value(m, &v, s, a, 1.0) } else { 0.0 }).sum())
            .collect();
    }
    Ok(start_value(m, &v))
}

pub fn start_value<M: DiscreteModel + ?Sized>(m: &M, v: &[f64]) -> f64 {
    m.initial().iter().map(|(s, p)| p * v[*s]).sum()
}

fn check_policy<M: DiscreteModel + ?Sized>(m: &M, policy: &[Vec<f64>]) -> Result<()> {
    if policy.len() != m.n_states() || policy.iter().any(|p| p.len() != m.n_actions()) {
        return Err(Error::InvalidParam("policy table does not match the model".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state(reward: f64) -> TabularModel {
        TabularModel::new(
            1,
            1,
            vec![vec![Outcome { prob: 1.0, next: 0, reward, terminal: false }]],
            vec![(0, 1.0)],
            vec![vec![]],
        )
        .unwrap()
    }

    fn deterministic(pi: &[usize], n_actions: usize) -> Vec<Vec<f64>> {
        pi.iter().map(|&a| (0..n_actions).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect()
    }

    #[test]
    fn geometric_series() {
        let (v, _) = value_iteration(&one_state(1.0), 0.95, 1e-9).unwrap();
        assert!((v[0] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn windless_grid_is_shortest_path() {
        let p = WindyGridParams { wind_prob: 0.0, ..Default::default() };
        let m = TabularModel::windygrid(&p).unwrap();
        let (v, _) = value_iteration(&m, 0.95, 1e-10).unwrap();
        // seven penalties then the goal on the eighth step
        let hand: f64 = -(0..7).map(|k| 0.95f64.powi(k)).sum::<f64>() + 10.0 * 0.95f64.powi(7);
        assert!((start_value(&m, &v) - hand).abs() < 1e-9);
        let (x, y) = (2usize, 1usize);
        let steps = (4 - x + 4 - y) as i32;
        let hand = -(0..steps - 1).map(|k| 0.95f64.powi(k)).sum::<f64>() + 10.0 * 0.95f64.powi(steps - 1);
        assert!((v[p.state_index((x, y), 0)] - hand).abs() < 1e-9);
    }

    #[test]
    fn optimal_policy_evaluates_to_optimum() {
        let p = WindyGridParams::default();
        let m = TabularModel::windygrid(&p).unwrap();
        let tol = 1e-8;
        let (v, pi) = value_iteration(&m, p.discount, tol).unwrap();
        let ve = exact_policy_eval(&m, &deterministic(&pi, 4), p.discount, tol).unwrap();
        for (a, b) in v.iter().zip(&ve) {
            assert!((a - b).abs() <= 2.0 * tol);
        }
        let uniform = vec![vec![0.25; 4]; m.n_states()];
        let vu = exact_policy_eval(&m, &uniform, p.discount, tol).unwrap();
        assert!(vu.iter().zip(&v).all(|(u, s)| *u <= s + tol));
    }

    #[test]
    fn initialization_does_not_matter() {
        let p = WindyGridParams::default();
        let m = TabularModel::windygrid(&p).unwrap();
        let tol = 1e-8;
        let (a, _) = value_iteration_from(&m, p.discount, tol, vec![0.0; m.n_states()]).unwrap();
        let (b, _) = value_iteration_from(&m, p.discount, tol, vec![100.0; m.n_states()]).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 2.0 * tol));
    }

    #[test]
    fn rows_sum_to_one() {
        let m = TabularModel::windygrid(&WindyGridParams::default()).unwrap();
        for s in 0..m.n_states() {
            for a in 0..4 {
                let t: f64 = m.outcomes(s, a).iter().map(|o| o.prob).sum();
                assert!((t - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pendulum_is_not_enumerable() {
        assert!(matches!(model_for(&EnvConfig::new(EnvName::Pendulum)), Err(Error::NotEnumerable(_))));
        assert!(model_for(&EnvConfig::new(EnvName::Windygrid)).is_ok());
    }

    #[test]
    fn finite_horizon_counts_steps() {
        let m = one_state(1.0);
        assert_eq!(finite_horizon_return(&m, &[vec![1.0]], 7).unwrap(), 7.0);
    }
}
