use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{short_hash, AgentName, BenchConfig, DatasetSource, ReferenceConfig};
use super::normalize_score;
use crate::agents::{
    env_defaults, evaluate_spec, train_hymopo, train_mopo_lite, train_offline_bcq, train_online_q, Policy,
};
use crate::datagen::{
    collect_history_confounded, corrupt_hide_dims, corrupt_obs_noise, generate_tier_dataset, read_dataset,
    train_tiers, Corruption, Dataset, HistorySwingUp, TierTraining,
};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::perturb::EnvSpec;
use crate::seed::derive_seed;
use crate::sim::simulator_for;

const STREAM_DATASET: u64 = 0xda7a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePair {
    pub random_ref: f64,
    pub expert_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedPair {
    key: String,
    env: EnvConfig,
    random_ref: f64,
    expert_ref: f64,
}

/// Shared between concurrent runs: tier trainings keyed by behavior env and
/// reference config, and reference pairs optionally persisted to a directory.
#[derive(Debug, Default)]
pub struct BenchCache {
    refs_dir: Option<PathBuf>,
    trainings: Mutex<HashMap<String, Arc<Mutex<Option<Arc<TierTraining>>>>>>,
    refs: Mutex<HashMap<String, ReferencePair>>,
}

fn training_key(spec: &EnvSpec, reference: &ReferenceConfig) -> String {
    let json = serde_json::to_string(&(spec, reference)).expect("spec serializes");
    short_hash(json.as_bytes())
}

impl BenchCache {
    pub fn new(refs_dir: Option<PathBuf>) -> Self {
        BenchCache { refs_dir, ..Default::default() }
    }

    /// Tier training on `spec`, computed once per key.
    pub fn training(&self, spec: &EnvSpec, reference: &ReferenceConfig) -> Result<Arc<TierTraining>> {
        let key = training_key(spec, reference);
        let slot = self.trainings.lock().expect("cache lock").entry(key).or_default().clone();
        let mut guard = slot.lock().expect("cache slot lock");
        if let Some(t) = guard.as_ref() {
            return Ok(t.clone());
        }
        let t = Arc::new(train_tiers(spec, &reference.agent, &reference.tiers, reference.seed, None)?);
        *guard = Some(t.clone());
        Ok(t)
    }

    /// Reference pair of the unperturbed `env`.
    pub fn reference_pair(&self, env: &EnvConfig, reference: &ReferenceConfig) -> Result<ReferencePair> {
        let spec = EnvSpec::new(env.clone());
        let key = training_key(&spec, reference);
        if let Some(p) = self.refs.lock().expect("cache lock").get(&key) {
            return Ok(*p);
        }
        let file = self.refs_dir.as_ref().map(|d| d.join(format!("refs-{key}.json")));
        if let Some(f) = file.as_ref().filter(|f| f.exists()) {
            let cached: CachedPair = serde_json::from_str(&fs::read_to_string(f)?)?;
            if cached.key == key {
                let p = ReferencePair { random_ref: cached.random_ref, expert_ref: cached.expert_ref };
                self.refs.lock().expect("cache lock").insert(key, p);
                return Ok(p);
            }
        }
        let t = self.training(&spec, reference)?;
        let p = ReferencePair { random_ref: t.random_ref, expert_ref: t.expert_ref };
        if let Some(f) = file {
            if let Some(dir) = f.parent() {
                fs::create_dir_all(dir)?;
            }
            let cached = CachedPair { key: key.clone(), env: env.clone(), random_ref: p.random_ref, expert_ref: p.expert_ref };
            fs::write(&f, serde_json::to_string_pretty(&cached)?)?;
        }
        self.refs.lock().expect("cache lock").insert(key, p);
        Ok(p)
    }
}

/// Uniform-policy and expert-tier returns on the unperturbed env.
pub fn compute_reference_pair(env: &EnvConfig, reference: &ReferenceConfig) -> Result<ReferencePair> {
    BenchCache::default().reference_pair(env, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub benchmark_id: String,
    pub agent: String,
    pub seed: u64,
    pub raw_return: f64,
    pub normalized_score: f64,
    pub wall_time: f64,
    pub config_hash: String,
    pub dataset_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub benchmark_id: String,
    pub agent: String,
    pub seed: u64,
    pub stage: String,
    pub message: String,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{} seed {}] {}: {}", self.benchmark_id, self.agent, self.seed, self.stage, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub results: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct RunJob {
    pub config: BenchConfig,
    pub seed: u64,
}

/// Every (benchmark, seed) pair of an expanded config.
pub fn plan(config: &BenchConfig) -> Result<Vec<RunJob>> {
    Ok(config
        .expand()?
        .into_iter()
        .flat_map(|c| c.seeds.clone().into_iter().map(move |seed| RunJob { config: c.clone(), seed }))
        .collect())
}

/// Build the dataset a run trains on. Recipes collect on the true env,
/// optionally under behavior wrappers, then apply corruptions in order.
pub fn build_dataset(
    env: &EnvConfig,
    source: &DatasetSource,
    reference: &ReferenceConfig,
    cache: &BenchCache,
    seed: u64,
) -> Result<Dataset> {
    let data_seed = derive_seed(seed, STREAM_DATASET);
    let mut data = if let Some(path) = &source.path {
        read_dataset(path)?
    } else {
        let spec = EnvSpec { env: env.clone(), perturbations: source.behavior_perturbations.clone() };
        let history = source.corruption.iter().find_map(|c| match c {
            Corruption::HistoryConfounded { k } => Some(*k),
            _ => None,
        });
        match history {
            Some(k) => {
                let grid = env_defaults(env, reference.agent.action_bins)?.action_grid;
                let mut actor = HistorySwingUp::new(k, grid, reference.tiers.collect_epsilon);
                let mut e = spec.build()?;
                let mut d = collect_history_confounded(e.as_mut(), k, &mut actor, source.records, data_seed)?;
                d.meta.env_perturbations = spec.perturbations.clone();
                d
            }
            None => {
                let tier = source.tier.ok_or_else(|| Error::Config("dataset needs a path or a tier".into()))?;
                let training = cache.training(&spec, reference)?;
                generate_tier_dataset(&training, &spec, tier, source.records, &reference.tiers, data_seed)?
            }
        }
    };
    for c in &source.corruption {
        data = match c {
            Corruption::ObsNoise { sigma, seed: s } => corrupt_obs_noise(&data, *sigma, derive_seed(seed, *s))?,
            Corruption::HiddenDims { indices } => corrupt_hide_dims(&data, indices)?,
            Corruption::HistoryConfounded { .. } => data,
        };
    }
    Ok(data)
}

/// Train the configured agent for one seed and score it on the true env.
pub fn run_job(job: &RunJob, cache: &BenchCache) -> std::result::Result<RunResult, RunFailure> {
    let cfg = &job.config;
    let seed = job.seed;
    let fail = |stage: &str, e: Error| RunFailure {
        benchmark_id: cfg.benchmark_id.clone(),
        agent: cfg.agent.name.as_str().into(),
        seed,
        stage: stage.into(),
        message: e.to_string(),
    };
    let start = Instant::now();
    let refs = cache.reference_pair(&cfg.env, &cfg.reference).map_err(|e| fail("references", e))?;
    let dataset = match (&cfg.dataset, cfg.agent.name.needs_dataset()) {
        (Some(src), true) => {
            Some(build_dataset(&cfg.env, src, &cfg.reference, cache, seed).map_err(|e| fail("dataset", e))?)
        }
        (None, true) => return Err(fail("config", Error::Config("agent requires a dataset".into()))),
        (_, false) => None,
    };
    let sim_spec = EnvSpec { env: cfg.env.clone(), perturbations: cfg.sim2real.clone() };
    let agent_cfg = &cfg.agent.config;
    let trained: Result<Policy> = match (cfg.agent.name, &dataset) {
        (AgentName::OnlineQ, _) => train_online_q(&sim_spec, agent_cfg, seed).map(|r| r.policy),
        (AgentName::OfflineBcq, Some(d)) => train_offline_bcq(d, agent_cfg),
        (AgentName::MopoLite, Some(d)) => train_mopo_lite(d, agent_cfg, seed).map(|r| r.policy),
        (AgentName::Hymopo, Some(d)) => simulator_for(&cfg.env, &cfg.sim2real)
            .and_then(|sim| train_hymopo(d, sim.as_ref(), agent_cfg, seed))
            .map(|r| r.policy),
        _ => unreachable!("dataset presence checked above"),
    };
    let policy = trained.map_err(|e| fail("train", e))?;
    let truth = EnvSpec::new(cfg.env.clone());
    let (raw, _) = evaluate_spec(&truth, &policy, cfg.eval_episodes, seed).map_err(|e| fail("evaluate", e))?;
    let normalized = normalize_score(raw, refs.random_ref, refs.expert_ref).map_err(|e| fail("normalize", e))?;
    Ok(RunResult {
        benchmark_id: cfg.benchmark_id.clone(),
        agent: cfg.agent.name.as_str().into(),
        seed,
        raw_return: raw,
        normalized_score: normalized,
        wall_time: start.elapsed().as_secs_f64(),
        config_hash: cfg.config_hash(),
        dataset_hash: dataset.map(|d| d.content_hash()).unwrap_or_default(),
    })
}

/// Run every (benchmark, seed) pair in order. A failing seed is recorded and
/// the rest continue.
pub fn run_benchmark(config: &BenchConfig, cache: &BenchCache) -> Result<BenchOutcome> {
    let mut out = BenchOutcome::default();
    for job in plan(config)? {
        match run_job(&job, cache) {
            Ok(r) => out.results.push(r),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

pub const RESULTS_HEADER: [&str; 8] =
    ["benchmark_id", "agent", "seed", "raw_return", "normalized_score", "wall_time", "config_hash", "dataset_hash"];

/// Append rows to a results file, writing the header if the file is new or empty.
pub fn append_results(path: &Path, rows: &[RunResult]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    if fresh && rows.is_empty() {
        w.write_record(RESULTS_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Format { line: 1, msg: format!("unexpected results header {header:?}") });
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<RunResult>, _>>()?)
}
