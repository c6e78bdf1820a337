use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::datagen::{dataset::hex, Corruption, Tier, TierConfig};
use crate::envs::{EnvConfig, EnvName};
use crate::error::{Error, Result};
use crate::perturb::PerturbSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentName {
    OnlineQ,
    OfflineBcq,
    MopoLite,
    Hymopo,
}

impl AgentName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentName::OnlineQ => "online_q",
            AgentName::OfflineBcq => "offline_bcq",
            AgentName::MopoLite => "mopo_lite",
            AgentName::Hymopo => "hymopo",
        }
    }

    pub fn needs_dataset(&self) -> bool {
        !matches!(self, AgentName::OnlineQ)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: AgentName,
    #[serde(default)]
    pub config: AgentConfig,
}

/// Either a dataset file or a recipe for generating one on the true env.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub tier: Option<Tier>,
    #[serde(default = "default_records")]
    pub records: usize,
    /// Applied in order after collection. `history_confounded` switches
    /// collection to the history-aware controller instead.
    #[serde(default)]
    pub corruption: Vec<Corruption>,
    /// Wrappers active while the behavior policy trains and collects.
    #[serde(default)]
    pub behavior_perturbations: Vec<PerturbSpec>,
}

fn default_records() -> usize {
    20_000
}

/// Training used for reference scores and tier policies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub seed: u64,
    pub agent: AgentConfig,
    pub tiers: TierConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub results: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub refs_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridVariant {
    pub label: String,
    #[serde(default)]
    pub perturbations: Vec<PerturbSpec>,
}

/// Axes crossed with the base config. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchGrid {
    pub sim2real: Vec<GridVariant>,
    pub tiers: Vec<Tier>,
    pub agents: Vec<AgentName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub benchmark_id: String,
    pub env: EnvConfig,
    #[serde(default)]
    pub sim2real: Vec<PerturbSpec>,
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    pub agent: AgentSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub grid: Option<BenchGrid>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_eval_episodes() -> usize {
    20
}

impl BenchConfig {
    pub fn new(benchmark_id: &str, env: EnvConfig, agent: AgentName) -> Self {
        BenchConfig {
            benchmark_id: benchmark_id.into(),
            env,
            sim2real: Vec::new(),
            dataset: None,
            agent: AgentSpec { name: agent, config: AgentConfig::default() },
            seeds: default_seeds(),
            eval_episodes: default_eval_episodes(),
            reference: ReferenceConfig::default(),
            output: OutputPaths::default(),
            grid: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.benchmark_id)));
        if self.benchmark_id.is_empty() {
            return Err(Error::Config("benchmark_id must not be empty".into()));
        }
        if self.env.name == EnvName::Bandit {
            return bad("the bandit has no agent benchmark; use the bandit analysis".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be >= 1".into());
        }
        self.agent.config.validate()?;
        let agents = match &self.grid {
            Some(g) if !g.agents.is_empty() => g.agents.clone(),
            _ => vec![self.agent.name],
        };
        let has_tier_axis = self.grid.as_ref().is_some_and(|g| !g.tiers.is_empty());
        for a in agents {
            if a.needs_dataset() && self.dataset.is_none() && !has_tier_axis {
                return bad(format!("agent {} requires a dataset", a.as_str()));
            }
        }
        if let Some(d) = &self.dataset {
            if d.path.is_some() && d.tier.is_some() {
                return bad("dataset takes either a path or a tier, not both".into());
            }
            if d.path.is_none() && d.tier.is_none() && !has_tier_axis {
                return bad("dataset needs a path or a tier".into());
            }
            if d.records == 0 {
                return bad("dataset records must be >= 1".into());
            }
        }
        Ok(())
    }

    /// Cross the grid axes into single benchmarks. Varying axes are appended
    /// to the benchmark id; the agent stays in its own column.
    pub fn expand(&self) -> Result<Vec<BenchConfig>> {
        self.validate()?;
        let mut base = self.clone();
        base.grid = None;
        let Some(grid) = &self.grid else {
            return Ok(vec![base]);
        };
        let sims: Vec<Option<&GridVariant>> =
            if grid.sim2real.is_empty() { vec![None] } else { grid.sim2real.iter().map(Some).collect() };
        let tiers: Vec<Option<Tier>> =
            if grid.tiers.is_empty() { vec![None] } else { grid.tiers.iter().copied().map(Some).collect() };
        let agents: Vec<Option<AgentName>> =
            if grid.agents.is_empty() { vec![None] } else { grid.agents.iter().copied().map(Some).collect() };
        let mut out = Vec::new();
        for sim in &sims {
            for tier in &tiers {
                for agent in &agents {
                    let mut c = base.clone();
                    let mut id = vec![self.benchmark_id.clone()];
                    if let Some(v) = sim {
                        c.sim2real = self.sim2real.iter().chain(&v.perturbations).cloned().collect();
                        id.push(v.label.clone());
                    }
                    if let Some(t) = tier {
                        let d = c.dataset.get_or_insert_with(|| DatasetSource {
                            path: None,
                            tier: None,
                            records: default_records(),
                            corruption: Vec::new(),
                            behavior_perturbations: Vec::new(),
                        });
                        d.path = None;
                        d.tier = Some(*t);
                        id.push(t.as_str().to_string());
                    }
                    if let Some(a) = agent {
                        c.agent.name = *a;
                    }
                    c.benchmark_id = id.join("/");
                    c.validate()?;
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    /// Hash of everything that affects a single run's score apart from the seed.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.output = OutputPaths::default();
        c.grid = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        short_hash(json.as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex(&Sha256::digest(bytes))[..16].to_string()
}

/// One named dataset to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecipe {
    pub name: String,
    pub env: EnvConfig,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: ReferenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeFile {
    pub datasets: Vec<DatasetRecipe>,
}

impl RecipeFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: RecipeFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for r in &f.datasets {
            if r.dataset.path.is_some() || r.dataset.tier.is_none() {
                return Err(Error::Config(format!("{}: a recipe needs a tier and no path", r.name)));
            }
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
