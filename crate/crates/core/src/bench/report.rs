use std::fmt::Write as _;

use crate::agents::mean_std;
use crate::error::{Error, Result};
use crate::oracle::BanditAnalysis;

use super::run::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Mean and sample std over the seeds of one (benchmark, agent) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub benchmark_id: String,
    pub agent: String,
    pub n: usize,
    pub raw_mean: f64,
    pub raw_std: f64,
    pub score_mean: f64,
    pub score_std: f64,
    pub wall_mean: f64,
    pub wall_std: f64,
}

/// Groups in order of first appearance.
pub fn aggregate(results: &[RunResult]) -> Vec<Aggregate> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in results {
        let k = (r.benchmark_id.as_str(), r.agent.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(b, a)| {
            let rows: Vec<&RunResult> = results.iter().filter(|r| r.benchmark_id == b && r.agent == a).collect();
            let col = |f: fn(&RunResult) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (raw_mean, raw_std) = col(|r| r.raw_return);
            let (score_mean, score_std) = col(|r| r.normalized_score);
            let (wall_mean, wall_std) = col(|r| r.wall_time);
            Aggregate {
                benchmark_id: b.into(),
                agent: a.into(),
                n: rows.len(),
                raw_mean,
                raw_std,
                score_mean,
                score_std,
                wall_mean,
                wall_std,
            }
        })
        .collect()
}

pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.1} ± {std:.1}")
}

pub fn emit_report(results: &[RunResult], format: ReportFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let aggs = aggregate(results);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["benchmark_id", "agent", "seed", "raw_return", "normalized_score", "wall_time"])?;
            for r in results {
                w.write_record([
                    r.benchmark_id.clone(),
                    r.agent.clone(),
                    r.seed.to_string(),
                    r.raw_return.to_string(),
                    r.normalized_score.to_string(),
                    r.wall_time.to_string(),
                ])?;
            }
            for a in &aggs {
                for (label, raw, score, wall) in
                    [("mean", a.raw_mean, a.score_mean, a.wall_mean), ("std", a.raw_std, a.score_std, a.wall_std)]
                {
                    w.write_record([
                        a.benchmark_id.clone(),
                        a.agent.clone(),
                        label.to_string(),
                        raw.to_string(),
                        score.to_string(),
                        wall.to_string(),
                    ])?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut benches: Vec<&str> = Vec::new();
            let mut agents: Vec<&str> = Vec::new();
            for a in &aggs {
                if !benches.contains(&a.benchmark_id.as_str()) {
                    benches.push(&a.benchmark_id);
                }
                if !agents.contains(&a.agent.as_str()) {
                    agents.push(&a.agent);
                }
            }
            let mut s = String::new();
            writeln!(s, "| benchmark | {} |", agents.join(" | ")).unwrap();
            writeln!(s, "|---|{}", "---|".repeat(agents.len())).unwrap();
            for b in benches {
                let cells: Vec<String> = agents
                    .iter()
                    .map(|ag| {
                        aggs.iter()
                            .find(|a| a.benchmark_id == b && a.agent == *ag)
                            .map_or("-".to_string(), |a| format_cell(a.score_mean, a.score_std))
                    })
                    .collect();
                writeln!(s, "| {b} | {} |", cells.join(" | ")).unwrap();
            }
            Ok(s)
        }
    }
}

/// The bandit analysis as a small markdown table of exact values.
pub fn bandit_report(analysis: &BanditAnalysis) -> String {
    let mut s = String::from("| action | true value | confounded estimate | bias |\n|---|---|---|---|\n");
    for a in 0..2 {
        writeln!(
            s,
            "| a{a} | {} | {} | {} |",
            analysis.true_values[a], analysis.confounded_estimates[a], analysis.bias_gap[a]
        )
        .unwrap();
    }
    writeln!(s, "\ntrue argmax: a{}, confounded argmax: a{}", analysis.true_argmax, analysis.confounded_argmax).unwrap();
    s
}
