use std::collections::HashMap;
use std::sync::LazyLock;

use hybench::agents::{evaluate_spec, policy_table, Actor, AgentConfig, Policy};
use hybench::bench::{compute_reference_pair, BenchCache, ReferenceConfig};
use hybench::datagen::{
    collect_dataset, collect_history_confounded, corrupt_hide_dims, corrupt_obs_noise, generate_tier_dataset,
    read_dataset, write_dataset, BehaviorMode, Corruption, Dataset, HistorySwingUp, Tier, TierConfig,
};
use hybench::envs::{ActValue, EnvConfig, EnvName};
use hybench::error::Result;
use hybench::oracle::{exact_policy_eval, finite_horizon_return, model_for, start_value, value_iteration};
use hybench::perturb::{EnvSpec, PerturbSpec};

static CACHE: LazyLock<BenchCache> = LazyLock::new(BenchCache::default);

fn grid() -> EnvConfig {
    EnvConfig::new(EnvName::Windygrid)
}

fn pendulum() -> EnvConfig {
    EnvConfig::new(EnvName::Pendulum)
}

fn torques() -> Vec<ActValue> {
    (0..9).map(|i| ActValue::Continuous(vec![-2.0 + 0.5 * i as f64])).collect()
}

fn random_pendulum(n: usize, seed: u64) -> Dataset {
    let mut env = pendulum().build().unwrap();
    collect_dataset(env.as_mut(), &mut Policy::uniform(torques()), n, BehaviorMode::Observed, seed).unwrap()
}

#[test]
fn collection_has_exact_length_and_is_seeded() {
    let a = random_pendulum(1_000, 3);
    assert_eq!(a.len(), 1_000);
    assert_eq!(a.meta.record_count, 1_000);
    assert_eq!(a, random_pendulum(1_000, 3));
    assert_ne!(a, random_pendulum(1_000, 4));
}

#[test]
fn pendulum_expert_clears_ninety() {
    let t = CACHE.training(&EnvSpec::new(pendulum()), &ReferenceConfig::default()).unwrap();
    let expert = t.tier_policy(Tier::Expert).unwrap();
    assert!(expert.normalized >= 90.0, "{}", expert.normalized);
    let medium = t.tier_policy(Tier::Medium).unwrap();
    assert!((35.0..=55.0).contains(&medium.normalized), "{}", medium.normalized);
}

#[test]
fn windygrid_expert_is_optimal_and_references_match_the_oracle() {
    let env = grid();
    let t = CACHE.training(&EnvSpec::new(env.clone()), &ReferenceConfig::default()).unwrap();
    let m = model_for(&env).unwrap();
    let (v, _) = value_iteration(&m, 0.95, 1e-12).unwrap();
    let expert = t.tier_policy(Tier::Expert).unwrap().policy;
    let got = start_value(&m, &exact_policy_eval(&m, &policy_table(&m, &expert), 0.95, 1e-12).unwrap());
    assert!((got - start_value(&m, &v)).abs() <= 1e-6);

    let pair = compute_reference_pair(&env, &ReferenceConfig::default()).unwrap();
    assert_eq!(pair, compute_reference_pair(&env, &ReferenceConfig::default()).unwrap());
    assert!(pair.random_ref < pair.expert_ref);
    let horizon = finite_horizon_return(&m, &policy_table(&m, &expert), 50).unwrap();
    let (_, std) = evaluate_spec(&EnvSpec::new(env), &expert, 100, 0).unwrap();
    assert!((pair.expert_ref - horizon).abs() <= 3.0 * std / 10.0 + 1e-9, "{} vs {horizon}", pair.expert_ref);
}

#[test]
fn tier_mixtures_are_built_from_their_parts() {
    let env = grid();
    let spec = EnvSpec::new(env.clone());
    let reference = ReferenceConfig::default();
    let t = CACHE.training(&spec, &reference).unwrap();
    let tiers = TierConfig::default();

    let me = generate_tier_dataset(&t, &spec, Tier::MediumExpert, 1_001, &tiers, 7).unwrap();
    assert_eq!(me.len(), 1_001);
    assert_eq!(me.meta.tier, Tier::MediumExpert);

    let replay = generate_tier_dataset(&t, &spec, Tier::MediumReplay, 1, &tiers, 7).unwrap();
    let end = t.run.checkpoints[t.medium_index].step;
    assert_eq!(replay.len(), end);
    assert_eq!(replay.records, t.run.buffer[..end]);

    let random = generate_tier_dataset(&t, &spec, Tier::Random, 500, &tiers, 7).unwrap();
    assert!(random.records.iter().all(|r| matches!(r.action, ActValue::Discrete(a) if a < 4)));
    assert!(t.random_ref < t.medium_return && t.medium_return < t.expert_ref);
}

/// Pearson chi-square statistic of action counts across groups.
fn chi_square(groups: &[Vec<f64>]) -> (f64, usize) {
    let cols = groups[0].len();
    let total: f64 = groups.iter().flatten().sum();
    let col_sums: Vec<f64> = (0..cols).map(|j| groups.iter().map(|g| g[j]).sum()).collect();
    let mut stat = 0.0;
    for g in groups {
        let row: f64 = g.iter().sum();
        for j in 0..cols {
            let expect = row * col_sums[j] / total;
            if expect > 0.0 {
                stat += (g[j] - expect).powi(2) / expect;
            }
        }
    }
    let live_cols = col_sums.iter().filter(|&&c| c > 0.0).count();
    (stat, (groups.len() - 1) * live_cols.saturating_sub(1))
}

/// Windygrid policy that sees the wind bit: moves right when calm, up when windy.
struct WindAware {
    rng: rand_chacha::ChaCha8Rng,
}

impl Actor for WindAware {
    fn act(&mut self, input: &[f64]) -> Result<ActValue> {
        use rand::Rng;
        if self.rng.random_bool(0.2) {
            return Ok(ActValue::Discrete(self.rng.random_range(0..4)));
        }
        Ok(ActValue::Discrete(if input[2] > 0.5 { 0 } else { 3 }))
    }

    fn reseed(&mut self, seed: u64) {
        use rand::SeedableRng;
        self.rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    }
}

/// Chi-square of action against the true wind, within each recorded cell.
fn wind_dependence(data: &Dataset, winds: &[u8]) -> (f64, usize) {
    let mut by_cell: HashMap<(i64, i64), Vec<Vec<f64>>> = HashMap::new();
    for (r, &w) in data.records.iter().zip(winds) {
        let key = (r.obs.0[0] as i64, r.obs.0[1] as i64);
        let a = match r.action {
            ActValue::Discrete(a) => a,
            _ => unreachable!(),
        };
        by_cell.entry(key).or_insert_with(|| vec![vec![0.0; 4]; 2])[w as usize][a] += 1.0;
    }
    by_cell.values().filter(|g| g.iter().all(|row| row.iter().sum::<f64>() >= 20.0)).fold((0.0, 0), |(s, d), g| {
        let (s2, d2) = chi_square(g);
        (s + s2, d + d2)
    })
}

#[test]
fn privileged_collection_leaves_action_dependence_on_the_hidden_wind() {
    use rand::SeedableRng;
    let actor = || WindAware { rng: rand_chacha::ChaCha8Rng::seed_from_u64(0) };

    let mut env = grid().build().unwrap();
    let priv_data = collect_dataset(env.as_mut(), &mut actor(), 20_000, BehaviorMode::Privileged, 1).unwrap();
    let winds: Vec<u8> = priv_data.records.iter().map(|r| r.obs.0[2] as u8).collect();
    let hidden = corrupt_hide_dims(&priv_data, &[2]).unwrap();
    assert!(hidden.records.iter().all(|r| r.obs.0[2] == 0.0 && r.next_obs.0[2] == 0.0));
    assert_eq!(hidden.meta.behavior_mode, BehaviorMode::Privileged);
    let (stat, dof) = wind_dependence(&hidden, &winds);
    // far beyond any chi-square quantile for this many degrees of freedom
    assert!(stat > dof as f64 + 10.0 * (2.0 * dof as f64).sqrt(), "chi2 {stat} dof {dof}");

    let blind_spec = EnvSpec::new(grid()).with(PerturbSpec::HiddenDims { indices: vec![2] });
    let mut blind_env = blind_spec.build().unwrap();
    let blind = collect_dataset(blind_env.as_mut(), &mut actor(), 20_000, BehaviorMode::Observed, 1).unwrap();
    let mut truth = grid().build().unwrap();
    // replay the same seed on the unwrapped env to recover the wind the actor never saw
    let mut replay = Vec::new();
    truth.reset(Some(1)).unwrap();
    for r in &blind.records {
        replay.push(truth.full_state().0[2] as u8);
        if truth.step(&r.action).unwrap().done {
            truth.reset(None).unwrap();
        }
    }
    let (stat, dof) = wind_dependence(&blind, &replay);
    assert!(stat < dof as f64 + 5.0 * (2.0 * dof as f64).sqrt(), "chi2 {stat} dof {dof}");
}

#[test]
fn observed_mode_action_depends_only_on_the_record() {
    let mut env = grid().build().unwrap();
    let data = collect_dataset(env.as_mut(), &mut WindAwareDeterministic, 2_000, BehaviorMode::Observed, 2).unwrap();
    let mut seen: HashMap<Vec<u64>, ActValue> = HashMap::new();
    for r in &data.records {
        let key = r.obs.0.iter().map(|v| v.to_bits()).collect();
        if let Some(prev) = seen.insert(key, r.action.clone()) {
            assert_eq!(prev, r.action);
        }
    }
}

struct WindAwareDeterministic;

impl Actor for WindAwareDeterministic {
    fn act(&mut self, input: &[f64]) -> Result<ActValue> {
        Ok(ActValue::Discrete(if input[2] > 0.5 { 0 } else { (input[0] as usize + input[1] as usize) % 4 }))
    }
}

#[test]
fn observation_noise_corruption() {
    let clean = random_pendulum(50_000, 5);
    let same = corrupt_obs_noise(&clean, 0.0, 1).unwrap();
    assert_eq!(same.records, clean.records);
    assert_eq!(same.meta.corruption, vec![Corruption::ObsNoise { sigma: 0.0, seed: 1 }]);

    let noisy = corrupt_obs_noise(&clean, 0.05, 1).unwrap();
    assert_eq!(noisy, corrupt_obs_noise(&clean, 0.05, 1).unwrap());
    for d in 0..3 {
        let diffs: Vec<f64> = noisy
            .records
            .iter()
            .zip(&clean.records)
            .flat_map(|(n, c)| [n.obs.0[d] - c.obs.0[d], n.next_obs.0[d] - c.next_obs.0[d]])
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let std = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        assert!((std - 0.05).abs() <= 0.05 * 0.05, "dim {d}: {std}");
    }
    // a state shared by consecutive records is perturbed once
    for (t, pair) in noisy.records.windows(2).enumerate() {
        if !clean.records[t].done {
            assert_eq!(pair[0].next_obs, pair[1].obs);
        }
    }
}

#[test]
fn hide_dims_corruption() {
    let clean = random_pendulum(500, 6);
    assert_eq!(corrupt_hide_dims(&clean, &[]).unwrap().records, clean.records);
    let hidden = corrupt_hide_dims(&clean, &[2]).unwrap();
    assert!(hidden.records.iter().all(|r| r.obs.0[2] == 0.0 && r.next_obs.0[2] == 0.0));
    assert!(corrupt_hide_dims(&clean, &[3]).is_err());
}

#[test]
fn history_window_of_one_is_observed_collection() {
    let mut a = pendulum().build().unwrap();
    let mut b = pendulum().build().unwrap();
    let hist = collect_history_confounded(a.as_mut(), 1, &mut HistorySwingUp::new(1, torques(), 0.1), 800, 9).unwrap();
    let plain = collect_dataset(b.as_mut(), &mut HistorySwingUp::new(1, torques(), 0.1), 800, BehaviorMode::Observed, 9).unwrap();
    assert_eq!(hist, plain);
    assert!(collect_history_confounded(a.as_mut(), 0, &mut HistorySwingUp::new(1, torques(), 0.1), 10, 9).is_err());
}

/// Records every window it is shown.
struct Recorder {
    inputs: Vec<Vec<f64>>,
}

impl Actor for Recorder {
    fn act(&mut self, input: &[f64]) -> Result<ActValue> {
        self.inputs.push(input.to_vec());
        Ok(ActValue::Continuous(vec![0.0]))
    }
}

#[test]
fn history_window_pads_episode_starts() {
    let mut env = pendulum().build().unwrap();
    let mut rec = Recorder { inputs: Vec::new() };
    let data = collect_history_confounded(env.as_mut(), 3, &mut rec, 402, 4).unwrap();
    assert_eq!(data.meta.corruption, vec![Corruption::HistoryConfounded { k: 3 }]);
    for start in [0, 200, 400] {
        let w = &rec.inputs[start];
        assert_eq!(&w[..6], &[0.0; 6]);
        assert_eq!(&w[6..], data.records[start].obs.0.as_slice());
    }
    let w = &rec.inputs[2];
    assert_eq!(&w[..3], data.records[0].obs.0.as_slice());
    assert_eq!(&w[3..6], data.records[1].obs.0.as_slice());
    assert!(data.records.iter().all(|r| r.obs.0.len() == 3));
}

#[test]
fn thousand_record_round_trip() {
    let data = random_pendulum(1_000, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    write_dataset(&data, &path).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, data);
    assert_eq!(back.content_hash(), data.content_hash());
}

#[test]
fn tier_training_is_seeded() {
    let cfg = AgentConfig::default();
    let spec = EnvSpec::new(grid());
    let a = hybench::datagen::train_tiers(&spec, &cfg, &TierConfig::default(), 3, None).unwrap();
    let b = hybench::datagen::train_tiers(&spec, &cfg, &TierConfig::default(), 3, None).unwrap();
    assert_eq!(a.checkpoint_returns, b.checkpoint_returns);
    assert_eq!(a.medium, b.medium);
    let bad = TierConfig { medium_band: (50.0, 40.0), ..TierConfig::default() };
    assert!(hybench::datagen::train_tiers(&spec, &cfg, &bad, 3, None).is_err());
}
