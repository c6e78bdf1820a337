use hybench::envs::pendulum::PendulumParams;
use hybench_web::{bandit_explore, pendulum_explore, pendulum_trajectories, windygrid_explore, windygrid_values};

#[test]
fn bandit_view_shows_the_reversal() {
    // true: a0 = (0.2 + 0.6) / 2 = 2/5, a1 = (0.3 + 0.4) / 2 = 7/20
    // logged: a0 only in z = 0 (1/5), a1 only in z = 1 (2/5)
    let json: serde_json::Value = serde_json::from_str(&bandit_explore(50, 20, 30, 60, 40, 0, 100).unwrap()).unwrap();
    assert_eq!(json["true_exact"], serde_json::json!(["2/5", "7/20"]));
    assert_eq!(json["naive_exact"], serde_json::json!(["1/5", "2/5"]));
    assert_eq!(json["true_best"], 0);
    assert_eq!(json["naive_best"], 1);
    assert!(bandit_explore(50, 20, 30, 60, 40, 0, 101).is_err());
    assert!(bandit_explore(50, 20, 30, 60, 40, 0, 0).is_err());
}

#[test]
fn matching_simulator_tracks_the_pendulum() {
    let p = PendulumParams::default();
    let t = pendulum_trajectories(p.gravity, p.mass, 200, std::f64::consts::PI).unwrap();
    assert_eq!(t.theta_true, t.theta_sim);
    assert!(t.one_step_error.iter().all(|&e| e == 0.0));
    assert!(t.torque.iter().all(|u| u.abs() <= p.torque_limit));

    let off = pendulum_trajectories(2.0 * p.gravity, p.mass, 200, std::f64::consts::PI - 0.1).unwrap();
    assert!(off.one_step_error.iter().any(|&e| e > 1e-3));
    assert_ne!(off.theta_true, off.theta_sim);
    assert!(pendulum_explore(-1.0, 1.0, 10, 0.0).is_err());
}

#[test]
fn calm_grid_values_are_discounted_path_lengths() {
    let map = windygrid_values(0.0, 4, 4, 0.9).unwrap();
    let p = hybench::envs::WindyGridParams::default();
    for y in 0..5 {
        for x in 0..5 {
            let d = (4 - x) + (4 - y);
            let expect = if d == 0 {
                0.0
            } else {
                (0..d - 1).map(|k| p.step_penalty * 0.9f64.powi(k as i32)).sum::<f64>() + p.goal_reward * 0.9f64.powi(d as i32 - 1)
            };
            assert!((map.values[y][x] - expect).abs() < 1e-8, "({x},{y})");
        }
    }
    assert!(windygrid_explore(0.3, 9, 9, 0.9).is_err());
    assert!(windygrid_explore(0.3, 4, 4, 1.0).is_err());
    let json: serde_json::Value = serde_json::from_str(&windygrid_explore(0.3, 3, 3, 0.95).unwrap()).unwrap();
    assert_eq!(json["values"].as_array().unwrap().len(), 5);
}
