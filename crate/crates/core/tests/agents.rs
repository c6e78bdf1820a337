use std::collections::BTreeMap;
use std::sync::LazyLock;

use hybench::agents::{
    evaluate_policy, evaluate_spec, policy_table, train_hymopo, train_mopo_lite, train_offline_bcq, train_offline_fq,
    train_online_q, AgentConfig, Policy,
};
use hybench::bench::{build_dataset, BenchCache, DatasetSource, ReferenceConfig};
use hybench::datagen::{collect_dataset, BehaviorMode, Dataset, Tier};
use hybench::dynmodel::ModelConfig;
use hybench::envs::{ActValue, EnvConfig, EnvName};
use hybench::oracle::{exact_policy_eval, finite_horizon_return, model_for, start_value, value_iteration};
use hybench::perturb::{EnvSpec, PerturbSpec};
use hybench::sim::simulator_for;

fn grid() -> EnvConfig {
    EnvConfig::new(EnvName::Windygrid)
}

static CACHE: LazyLock<BenchCache> = LazyLock::new(BenchCache::default);

fn tier_data(env: &EnvConfig, tier: Tier, records: usize, seed: u64) -> Dataset {
    let src = DatasetSource { path: None, tier: Some(tier), records, corruption: vec![], behavior_perturbations: vec![] };
    build_dataset(env, &src, &ReferenceConfig::default(), &CACHE, seed).unwrap()
}

fn exact_value(env: &EnvConfig, policy: &Policy) -> f64 {
    let m = model_for(env).unwrap();
    start_value(&m, &exact_policy_eval(&m, &policy_table(&m, policy), 0.95, 1e-10).unwrap())
}

fn greedy_actions(policy: &Policy, data: &Dataset) -> Vec<usize> {
    data.records.iter().map(|r| policy.greedy_index(&r.obs)).collect()
}

#[test]
fn online_q_reaches_the_windygrid_optimum() {
    let env = grid();
    let run = train_online_q(&EnvSpec::new(env.clone()), &AgentConfig::default(), 0).unwrap();
    let m = model_for(&env).unwrap();
    let (v, _) = value_iteration(&m, 0.95, 1e-10).unwrap();
    let got = exact_value(&env, &run.policy);
    assert!((got - start_value(&m, &v)).abs() < 1e-3, "{got} vs {}", start_value(&m, &v));
    assert_eq!(run.buffer.len(), 3_000);
}

#[test]
fn bcq_copies_a_deterministic_expert() {
    let env = grid();
    let m = model_for(&env).unwrap();
    let (_, pi) = value_iteration(&m, 0.95, 1e-10).unwrap();
    let probs: Vec<Vec<f64>> = pi.iter().map(|&a| (0..4).map(|i| if i == a { 1.0 } else { 0.0 }).collect()).collect();
    let features = hybench::agents::env_defaults(&env, 9).unwrap().q_features;
    let fmap = hybench::features::FeatureMap::new(features, 3).unwrap();
    let mut cell_probs = vec![vec![0.25; 4]; fmap.dim()];
    for (s, o) in m.observations.iter().enumerate() {
        cell_probs[fmap.active(o).unwrap()] = probs[s].clone();
    }
    let mut expert = Policy::table(fmap, cell_probs, (0..4).map(ActValue::Discrete).collect()).unwrap();
    let mut env_box = env.build().unwrap();
    let data = collect_dataset(env_box.as_mut(), &mut expert, 2_000, BehaviorMode::Observed, 5).unwrap();

    let cfg = AgentConfig { bc_threshold: 0.5, ..AgentConfig::default() };
    let learned = train_offline_bcq(&data, &cfg).unwrap();
    let same = data.records.iter().filter(|r| learned.greedy_index(&r.obs) == expert.greedy_index(&r.obs)).count();
    assert!(same as f64 >= 0.99 * data.len() as f64, "{same} of {}", data.len());
}

#[test]
fn unconstrained_bcq_is_fitted_q() {
    let data = tier_data(&grid(), Tier::Medium, 2_000, 0);
    let cfg = AgentConfig { bc_threshold: 0.0, ..AgentConfig::default() };
    let a = train_offline_bcq(&data, &cfg).unwrap();
    let b = train_offline_fq(&data, &cfg).unwrap();
    assert_eq!(greedy_actions(&a, &data), greedy_actions(&b, &data));
}

#[test]
fn empty_dataset_is_rejected() {
    let data = tier_data(&grid(), Tier::Random, 10, 0);
    let empty = Dataset { meta: data.meta.clone(), records: vec![] };
    assert!(train_offline_bcq(&empty, &AgentConfig::default()).is_err());
    assert!(train_mopo_lite(&empty, &AgentConfig::default(), 0).is_err());
}

#[test]
fn zero_horizon_model_agents_are_fitted_q() {
    let data = tier_data(&grid(), Tier::Medium, 2_000, 1);
    let cfg = AgentConfig { horizon: 0, ..AgentConfig::default() };
    let fq = greedy_actions(&train_offline_fq(&data, &cfg).unwrap(), &data);
    let mopo = train_mopo_lite(&data, &cfg, 3).unwrap();
    assert!(mopo.traces.is_empty());
    assert_eq!(greedy_actions(&mopo.policy, &data), fq);

    let sim = simulator_for(&grid(), &[]).unwrap();
    let single = AgentConfig {
        horizon: 0,
        lambda: 0.0,
        model: Some(ModelConfig { members: 1, ..hybench::agents::env_defaults(&grid(), 9).unwrap().model }),
        ..AgentConfig::default()
    };
    let hy = train_hymopo(&data, sim.as_ref(), &single, 3).unwrap();
    assert_eq!(hy.ensemble.len(), 1);
    assert_eq!(greedy_actions(&hy.policy, &data), fq);
}

#[test]
fn huge_penalty_falls_back_to_the_data() {
    let env = grid();
    let data = tier_data(&env, Tier::Medium, 5_000, 2);
    let min_reward = data.records.iter().map(|r| r.reward).fold(f64::INFINITY, f64::min);
    let cfg = AgentConfig { lambda: 1e6, bc_threshold: 0.0, ..AgentConfig::default() };
    let run = train_mopo_lite(&data, &cfg, 4).unwrap();
    assert!(!run.traces.is_empty());
    assert!(run.traces.iter().all(|t| t.penalized_reward <= min_reward));
    let mopo = exact_value(&env, &run.policy);
    let offline = exact_value(&env, &train_offline_bcq(&data, &cfg).unwrap());
    assert!((mopo - offline).abs() <= 0.05 * offline.abs().max(1.0), "{mopo} vs {offline}");
}

#[test]
fn perfect_simulator_hybrid_keeps_up_with_direct_model() {
    let env = EnvConfig::new(EnvName::Pendulum);
    let sim = simulator_for(&env, &[]).unwrap();
    let spec = EnvSpec::new(env.clone());
    let cfg = AgentConfig { rollout_batch: 500, horizon: 10, lambda: 1.0, ..AgentConfig::default() };
    let (mut hybrid, mut direct) = (0.0, 0.0);
    for seed in 0..3 {
        let data = tier_data(&env, Tier::Medium, 10_000, seed);
        let hy = train_hymopo(&data, sim.as_ref(), &cfg, seed).unwrap();
        for t in &hy.traces {
            let exact = sim.predict(&t.obs, &t.action).unwrap();
            let err: f64 = exact.iter().zip(&t.next_obs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "synthetic step off the true dynamics by {err}");
        }
        hybrid += evaluate_spec(&spec, &hy.policy, 20, 100 + seed).unwrap().0 / 3.0;
        let mo = train_mopo_lite(&data, &cfg, seed).unwrap();
        direct += evaluate_spec(&spec, &mo.policy, 20, 100 + seed).unwrap().0 / 3.0;
    }
    // The direct pendulum model is itself nearly exact, so the two differ by seed noise.
    assert!(hybrid >= direct - 0.1 * direct.abs(), "hybrid {hybrid} direct {direct}");
}

#[test]
fn model_training_is_deterministic() {
    let data = tier_data(&grid(), Tier::Medium, 1_000, 0);
    let sim = simulator_for(&grid(), &[PerturbSpec::TransitionParamOverride { overrides: BTreeMap::from([("wind_prob".into(), 0.2)]) }])
        .unwrap();
    let a = train_hymopo(&data, sim.as_ref(), &AgentConfig::default(), 9).unwrap();
    let b = train_hymopo(&data, sim.as_ref(), &AgentConfig::default(), 9).unwrap();
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.policy.to_json().unwrap(), b.policy.to_json().unwrap());
}

#[test]
fn evaluation_matches_the_oracle() {
    let env = grid();
    let run = train_online_q(&EnvSpec::new(env.clone()), &AgentConfig::default(), 1).unwrap();
    let policy = run.policy.with_epsilon(0.3);
    let m = model_for(&env).unwrap();
    let expected = finite_horizon_return(&m, &policy_table(&m, &policy), 50).unwrap();
    let mut e = env.build().unwrap();
    let n = 10_000;
    let (mean, std) = evaluate_policy(e.as_mut(), &policy, n, 3).unwrap();
    assert!((mean - expected).abs() <= 3.0 * std / (n as f64).sqrt(), "{mean} vs {expected} (std {std})");
}

#[test]
fn deterministic_evaluation_has_no_spread() {
    let env = grid().with("wind_prob", 0.0);
    let run = train_online_q(&EnvSpec::new(env.clone()), &AgentConfig::default(), 0).unwrap();
    let mut e = env.build().unwrap();
    assert_eq!(evaluate_policy(e.as_mut(), &run.policy, 10, 0).unwrap().1, 0.0);
    let (_, std) = evaluate_policy(e.as_mut(), &Policy::uniform((0..4).map(ActValue::Discrete).collect()), 1, 0).unwrap();
    assert_eq!(std, 0.0);
    assert!(evaluate_policy(e.as_mut(), &run.policy, 0, 0).is_err());
}
