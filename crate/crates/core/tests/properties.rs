use std::collections::BTreeMap;

use hybench::bench::normalize_score;
use hybench::datagen::{
    corrupt_hide_dims, read_from, write_dataset, BehaviorMode, Dataset, DatasetMeta, Tier, TransitionRecord, FORMAT_VERSION,
};
use hybench::dynmodel::{fit_direct_ensemble, ModelConfig, PenaltyMode};
use hybench::envs::windygrid::{windygrid_step, GridAction, WindyGridParams};
use hybench::envs::{ActValue, EnvConfig, EnvName, ObsVec};
use hybench::seed::derive_seed;
use proptest::prelude::*;

fn meta(obs_dim: usize) -> DatasetMeta {
    DatasetMeta {
        format_version: FORMAT_VERSION.into(),
        env_name: EnvName::Pendulum,
        env_params: BTreeMap::new(),
        env_perturbations: Vec::new(),
        tier: Tier::Medium,
        corruption: Vec::new(),
        behavior_mode: BehaviorMode::Observed,
        seed: 7,
        obs_dim,
        record_count: 0,
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

fn record() -> impl Strategy<Value = TransitionRecord> {
    (prop::collection::vec(finite(), 3), finite(), finite(), prop::collection::vec(finite(), 3), any::<bool>()).prop_map(
        |(o, a, r, o2, d)| TransitionRecord {
            obs: ObsVec(o),
            action: ActValue::Continuous(vec![a]),
            reward: r,
            next_obs: ObsVec(o2),
            done: d,
        },
    )
}

proptest! {
    #[test]
    fn dataset_round_trip_is_bit_exact(records in prop::collection::vec(record(), 1..40)) {
        let d = Dataset::new(meta(3), records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&d, &path).unwrap();
        let back = read_from(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
        for (a, b) in back.records.iter().zip(&d.records) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.obs), bits(&b.obs));
            prop_assert_eq!(bits(&a.next_obs), bits(&b.next_obs));
            prop_assert_eq!(a.reward.to_bits(), b.reward.to_bits());
        }
        prop_assert_eq!(back, d);
    }

    #[test]
    fn hidden_dims_are_zero(records in prop::collection::vec(record(), 1..20), mask in prop::collection::vec(any::<bool>(), 3)) {
        let d = Dataset::new(meta(3), records).unwrap();
        let idx: Vec<usize> = (0..3).filter(|&i| mask[i]).collect();
        let h = corrupt_hide_dims(&d, &idx).unwrap();
        for (r, orig) in h.records.iter().zip(&d.records) {
            for i in 0..3 {
                if mask[i] {
                    prop_assert_eq!(r.obs.0[i], 0.0);
                    prop_assert_eq!(r.next_obs.0[i], 0.0);
                } else {
                    prop_assert_eq!(r.obs.0[i], orig.obs.0[i]);
                }
            }
            prop_assert_eq!(r.reward, orig.reward);
        }
    }

    #[test]
    fn normalization_is_affine(raw in -1e4..1e4f64, lo in -1e4..1e4f64, gap in 1e-3..1e4f64, a in 0.1..10.0f64, b in -100.0..100.0f64) {
        let hi = lo + gap;
        let s = normalize_score(raw, lo, hi).unwrap();
        let t = normalize_score(a * raw + b, a * lo + b, a * hi + b).unwrap();
        prop_assert!((s - t).abs() <= 1e-6 * s.abs().max(1.0));
        prop_assert!((normalize_score(lo, lo, hi).unwrap()).abs() < 1e-9);
        prop_assert!((normalize_score(hi, lo, hi).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn seed_streams_are_stable_and_distinct(master in any::<u64>(), s1 in 0u64..64, s2 in 0u64..64) {
        prop_assert_eq!(derive_seed(master, s1), derive_seed(master, s1));
        if s1 != s2 {
            prop_assert_ne!(derive_seed(master, s1), derive_seed(master, s2));
        }
    }

    #[test]
    fn grid_moves_stay_on_the_board(x in 0i64..5, y in 0i64..5, wind in 0u8..2, a in 0usize..4) {
        let p = WindyGridParams::default();
        let ((nx, ny), r, done) = windygrid_step((x, y), wind, GridAction::from_index(a).unwrap(), &p).unwrap();
        prop_assert!(nx < p.width && ny < p.height);
        prop_assert!((nx as i64 - x).abs() + (ny as i64 - y).abs() <= 2);
        prop_assert_eq!(done, (nx, ny) == p.goal);
        prop_assert_eq!(r, if done { p.goal_reward } else { p.step_penalty });
    }

    #[test]
    fn pendulum_observations_lie_on_the_circle(seed in any::<u64>(), torques in prop::collection::vec(-5.0..5.0f64, 1..50)) {
        let mut env = EnvConfig::new(EnvName::Pendulum).build().unwrap();
        env.reset(Some(seed)).unwrap();
        for u in torques {
            let s = env.step(&ActValue::Continuous(vec![u])).unwrap();
            prop_assert!((s.obs.0[0].powi(2) + s.obs.0[1].powi(2) - 1.0).abs() < 1e-9);
            prop_assert!(s.obs.0[2].abs() <= 8.0 + 1e-12);
            prop_assert!(s.reward <= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn penalized_reward_never_exceeds_the_model_reward(
        records in prop::collection::vec(record(), 8..30),
        probe in prop::collection::vec(-10.0..10.0f64, 4),
        lambda in 0.0..100.0f64,
    ) {
        let records = records.into_iter().map(|mut r| {
            for v in r.obs.0.iter_mut().chain(r.next_obs.0.iter_mut()) {
                *v = v.clamp(-10.0, 10.0);
            }
            r.reward = r.reward.clamp(-10.0, 10.0);
            r.action = ActValue::Continuous(vec![match &r.action { ActValue::Continuous(a) => a[0].clamp(-2.0, 2.0), _ => 0.0 }]);
            r
        }).collect();
        let d = Dataset::new(meta(3), records).unwrap();
        let e = fit_direct_ensemble(&d, &ModelConfig { features: hybench::features::FeatureKind::Polynomial { degree: 1 }, ..ModelConfig::default() }).unwrap();
        let action = ActValue::Continuous(vec![probe[3]]);
        for mode in [PenaltyMode::Disagreement, PenaltyMode::Frobenius] {
            let u = e.penalty(&probe[..3], &action, mode);
            prop_assert!(u >= 0.0 && u.is_finite());
            for m in 0..e.len() {
                let r = e.predict(m, &probe[..3], &action, None).unwrap().reward;
                prop_assert!(r - lambda * u <= r);
            }
        }
    }
}
