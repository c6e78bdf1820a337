//! Transition datasets and their line-delimited JSON file format.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{ActValue, EnvName, ObsVec};
use crate::error::{Error, Result};
use crate::perturb::PerturbSpec;

pub const FORMAT_VERSION: &str = "b4mrl-ds/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    #[serde(rename = "o")]
    pub obs: ObsVec,
    #[serde(rename = "a")]
    pub action: ActValue,
    #[serde(rename = "r")]
    pub reward: f64,
    #[serde(rename = "o2")]
    pub next_obs: ObsVec,
    #[serde(rename = "d")]
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Random,
    Medium,
    MediumReplay,
    MediumExpert,
    Expert,
}

impl Tier {
    pub const ALL: [Tier; 5] = [Tier::Random, Tier::Medium, Tier::MediumReplay, Tier::MediumExpert, Tier::Expert];

    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Random => "random",
            Tier::Medium => "medium",
            Tier::MediumReplay => "medium_replay",
            Tier::MediumExpert => "medium_expert",
            Tier::Expert => "expert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorMode {
    Observed,
    Privileged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Corruption {
    ObsNoise { sigma: f64, seed: u64 },
    HiddenDims { indices: Vec<usize> },
    HistoryConfounded { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: String,
    pub env_name: EnvName,
    pub env_params: BTreeMap<String, f64>,
    /// Sim2real wrappers active on the collecting environment.
    #[serde(default)]
    pub env_perturbations: Vec<PerturbSpec>,
    pub tier: Tier,
    /// Corruptions in the order they were applied.
    #[serde(default)]
    pub corruption: Vec<Corruption>,
    pub behavior_mode: BehaviorMode,
    pub seed: u64,
    pub obs_dim: usize,
    pub record_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<TransitionRecord>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, records: Vec<TransitionRecord>) -> Result<Self> {
        let mut meta = meta;
        meta.record_count = records.len();
        let d = Dataset { meta, records };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.meta.record_count != self.records.len() {
            return Err(Error::Format {
                line: 1,
                msg: format!("record_count {} but {} records", self.meta.record_count, self.records.len()),
            });
        }
        for (i, r) in self.records.iter().enumerate() {
            check_record(r, self.meta.obs_dim, i + 2)?;
        }
        Ok(())
    }

    /// Concatenate datasets collected on the same environment.
    pub fn concat(parts: &[&Dataset], tier: Tier) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let mut meta = first.meta.clone();
        meta.tier = tier;
        let mut records = Vec::new();
        for p in parts {
            if p.meta.obs_dim != meta.obs_dim || p.meta.env_name != meta.env_name {
                return Err(Error::InvalidParam("cannot concatenate datasets from different environments".into()));
            }
            records.extend(p.records.iter().cloned());
        }
        Dataset::new(meta, records)
    }

    /// SHA-256 of the serialized form, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut buf = Vec::new();
        write_to(self, &mut buf).expect("writing to memory");
        h.update(&buf);
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_record(r: &TransitionRecord, obs_dim: usize, line: usize) -> Result<()> {
    if r.obs.len() != obs_dim || r.next_obs.len() != obs_dim {
        return Err(Error::Dimension {
            line,
            msg: format!("expected {obs_dim} observation entries, got o={} o2={}", r.obs.len(), r.next_obs.len()),
        });
    }
    let finite = r.reward.is_finite() && r.obs.iter().chain(r.next_obs.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::Format { line, msg: "non-finite value".into() });
    }
    Ok(())
}

fn write_to<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &d.meta)?;
    w.write_all(b"\n")?;
    for r in &d.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    d.validate()?;
    write_to(d, BufWriter::new(File::create(path)?))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_from(BufReader::new(File::open(path)?))
}

pub fn read_from<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::Format { line: 1, msg: "empty file".into() }),
    };
    let raw: serde_json::Value =
        serde_json::from_str(&header).map_err(|e| Error::Format { line: 1, msg: e.to_string() })?;
    let version = raw.get("format_version").and_then(|v| v.as_str()).unwrap_or("<missing>");
    if version != FORMAT_VERSION {
        return Err(Error::Version { line: 1, found: version.to_string(), expected: FORMAT_VERSION.to_string() });
    }
    let meta: DatasetMeta = serde_json::from_value(raw).map_err(|e| Error::Format { line: 1, msg: e.to_string() })?;
    let mut records = Vec::with_capacity(meta.record_count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let r: TransitionRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format { line: lineno, msg: e.to_string() })?;
        check_record(&r, meta.obs_dim, lineno)?;
        records.push(r);
    }
    if records.len() != meta.record_count {
        return Err(Error::Format {
            line: records.len() + 2,
            msg: format!("expected {} records, found {}", meta.record_count, records.len()),
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset { meta, records })
}
