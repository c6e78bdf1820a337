use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use hybench::bench::{
    append_results, bandit_report, build_dataset, emit_report, plan, read_results, run_job, BenchCache, BenchConfig,
    RecipeFile, ReportFormat, RunFailure,
};
use hybench::datagen::write_dataset;
use hybench::envs::bandit::BanditSpec;
use hybench::oracle::{bandit_empirical_check, BanditAnalysis, BehaviorPolicy};

#[derive(Parser)]
#[command(name = "hybench", version, about = "Hybrid offline + simulator RL benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate dataset files from a recipe file.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; one `<name>.jsonl` per recipe.
        #[arg(long, default_value = "data")]
        out: PathBuf,
        /// Override every recipe's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a benchmark config and append rows to the results file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Results file; defaults to the config's output.results or results.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Aggregate a results file into a csv or markdown report.
    Report {
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the exact confounded-bandit analysis and a Monte Carlo check.
    Bandit {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Compute and cache the reference pair of a config's environment.
    Refs {
        #[arg(long)]
        config: PathBuf,
        /// Cache directory; defaults to the config's output.refs_cache or refs/.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the reference seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be >= 1");
        }
        b = b.num_threads(j);
    }
    Ok(b.build()?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn gen_data(config: &Path, out: &Path, seed: Option<u64>, jobs: Option<usize>) -> Result<()> {
    let recipes = RecipeFile::load(config).with_context(|| format!("loading {}", config.display()))?;
    fs::create_dir_all(out)?;
    let cache = BenchCache::default();
    let written: Vec<Result<String>> = pool(jobs)?.install(|| {
        recipes
            .datasets
            .par_iter()
            .map(|r| {
                let s = seed.unwrap_or(r.seed);
                let d = build_dataset(&r.env, &r.dataset, &r.reference, &cache, s)
                    .with_context(|| format!("dataset {}", r.name))?;
                let path = out.join(format!("{}.jsonl", r.name));
                write_dataset(&d, &path).with_context(|| format!("writing {}", path.display()))?;
                Ok(format!("{} {} records {}", path.display(), d.len(), d.content_hash()))
            })
            .collect()
    });
    let mut failed = 0;
    for w in written {
        match w {
            Ok(line) => println!("{line}"),
            Err(e) => {
                failed += 1;
                eprintln!("error: {e:#}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} dataset(s) failed");
    }
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, jobs: Option<usize>) -> Result<()> {
    let mut cfg = BenchConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let results_path = out.or(cfg.output.results.clone()).unwrap_or_else(|| PathBuf::from("results.csv"));
    let jobs_list = plan(&cfg)?;
    for p in [Some(&results_path), cfg.output.report.as_ref()].into_iter().flatten() {
        ensure_parent(p)?;
    }
    let cache = BenchCache::new(cfg.output.refs_cache.clone());
    let (tx, rx) = mpsc::channel();
    let pool = pool(jobs)?;
    let mut failures: Vec<RunFailure> = Vec::new();
    let mut results = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(|| {
            pool.install(|| {
                jobs_list.par_iter().enumerate().for_each_with(tx, |tx, (i, job)| {
                    let _ = tx.send((i, run_job(job, &cache)));
                })
            })
        });
        // single writer: rows are appended here as runs finish
        for (_, outcome) in rx {
            match outcome {
                Ok(r) => {
                    println!("{} {} seed {}: {:.1}", r.benchmark_id, r.agent, r.seed, r.normalized_score);
                    append_results(&results_path, std::slice::from_ref(&r))?;
                    results.push(r);
                }
                Err(f) => {
                    eprintln!("failed: {f}");
                    failures.push(f);
                }
            }
        }
        Ok(())
    })?;
    if let Some(report) = &cfg.output.report {
        let format = if report.extension().is_some_and(|e| e == "csv") { ReportFormat::Csv } else { ReportFormat::Markdown };
        if !results.is_empty() {
            fs::write(report, emit_report(&results, format)?)?;
        }
    }
    if !failures.is_empty() {
        eprintln!("{} of {} runs failed:", failures.len(), jobs_list.len());
        for f in &failures {
            eprintln!("  {}", f);
        }
        bail!("benchmark incomplete");
    }
    Ok(())
}

fn report(results: &Path, format: Format, out: Option<PathBuf>) -> Result<()> {
    let rows = read_results(results).with_context(|| format!("reading {}", results.display()))?;
    let format = match format {
        Format::Csv => ReportFormat::Csv,
        Format::Markdown => ReportFormat::Markdown,
    };
    let text = emit_report(&rows, format)?;
    match out {
        Some(p) => {
            ensure_parent(&p)?;
            fs::write(p, text)?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn bandit(seed: u64, samples: u64) -> Result<()> {
    let spec = BanditSpec::confounded();
    let behavior = BehaviorPolicy::confounding();
    let analysis = BanditAnalysis::new(&spec, &behavior)?;
    print!("{}", bandit_report(&analysis));
    let check = bandit_empirical_check(&spec, &behavior, samples, seed)?;
    let show = |m: Option<f64>| m.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "\nMonte Carlo (n = {samples}, seed {seed}): a0 {} over {} pulls, a1 {} over {} pulls, argmax a{}",
        show(check.means[0]),
        check.counts[0],
        show(check.means[1]),
        check.counts[1],
        check.argmax
    );
    Ok(())
}

fn refs(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = BenchConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.reference.seed = s;
    }
    let dir = out.or(cfg.output.refs_cache.clone()).unwrap_or_else(|| PathBuf::from("refs"));
    let cache = BenchCache::new(Some(dir.clone()));
    let pair = cache.reference_pair(&cfg.env, &cfg.reference)?;
    println!(
        "{} random_ref {} expert_ref {} (cached in {})",
        cfg.env.name.as_str(),
        pair.random_ref,
        pair.expert_ref,
        dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData { config, out, seed, jobs } => gen_data(&config, &out, seed, jobs),
        Command::Run { config, seed, out, jobs } => run(&config, seed, out, jobs),
        Command::Report { results, format, out } => report(&results, format, out),
        Command::Bandit { seed, samples } => bandit(seed, samples),
        Command::Refs { config, out, seed } => refs(&config, out, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
