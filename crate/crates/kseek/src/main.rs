use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kseek::harness::{self, Grid};
use kseek::{analysis, io};
use kseek_core::eval::{ari, cari};
use kseek_core::overlap::{generate_scenario_dataset, CovStructure, OverlapSpec, DEFAULT_MC_SAMPLES};
use kseek_core::search::{best_of_runs, Method, SearchConfig};
use kseek_core::stats::{
    ad_critical_value, ad_statistic, dip_test, ks_critical_value, ks_statistic, normal_cdf, SortedSample,
};
use kseek_core::{Partition, Stream};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kseek", version, about = "Estimate the number of clusters and benchmark the estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labelled dataset from a mixture calibrated to a target overlap.
    Generate {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        omega: f64,
        /// 1-4 or a structure name.
        #[arg(long, default_value = "1")]
        cov: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        mc_samples: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating model as JSON.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Univariate normality or unimodality test on a one-column file.
    Stattest {
        test: TestKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        /// Bootstrap size for the dip p-value.
        #[arg(long, default_value_t = 1000)]
        b: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one estimator on a dataset.
    Fit {
        #[arg(long)]
        method: Method,
        #[arg(long, alias = "input")]
        data: PathBuf,
        /// JSON overlay on the method's default hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a predicted labelling with the truth.
    Eval {
        /// Label CSV or a `fit` result JSON.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a simulation grid.
    Sim {
        #[arg(long)]
        grid: PathBuf,
        /// Results CSV.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `manifest.json` next to the results.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Overrides the grid's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Median and IQR of run times per scenario and method.
        #[arg(long)]
        timing: Option<PathBuf>,
        /// One row per (scenario, dataset, method).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Add mean wall-clock time to the results file.
        #[arg(long)]
        with_elapsed: bool,
    },
    /// Group-lasso effects analysis of a results file.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        /// Output directory.
        #[arg(long, alias = "out-dir")]
        out: PathBuf,
        /// Highest interaction order with the method factor.
        #[arg(long, default_value_t = 4)]
        interactions: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        /// FROM=INTO, e.g. `n=method:n`. Repeatable.
        #[arg(long)]
        absorb: Vec<String>,
    },
    /// Long-format tables for plotting.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory written by `analyze`; its tables go to `--effects-out`.
        #[arg(long)]
        effects: Option<PathBuf>,
        /// Defaults to `<out stem>_effects.csv`.
        #[arg(long)]
        effects_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Ad,
    Dip,
    Ks,
}

fn parse_cov(s: &str) -> Result<CovStructure> {
    if let Ok(i) = s.parse::<usize>() {
        return CovStructure::from_index(i).with_context(|| format!("covariance index {i} not in 1..=4"));
    }
    serde_json::from_value(json!(s)).with_context(|| format!("unknown covariance structure '{s}'"))
}

/// 0-based labels from a label CSV or the `labels` of a `fit` result.
fn read_prediction(path: &Path) -> Result<Vec<usize>> {
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = io::read_json(path)?;
        let labels = v["labels"].as_array().with_context(|| format!("{}: no labels array", path.display()))?;
        return labels
            .iter()
            .map(|l| match l.as_u64() {
                Some(l) if l >= 1 => Ok(l as usize - 1),
                _ => bail!("{}: labels must be 1-based integers", path.display()),
            })
            .collect();
    }
    io::read_labels(path)
}

fn print(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate { k, p, omega, cov, n, seed, mc_samples, out, model } => {
            let root = Stream::new(seed);
            let mut spec = OverlapSpec::new(k, p, omega, parse_cov(&cov)?, root.child_named("model").key());
            spec.mc_samples = mc_samples;
            let (m, data, report) = generate_scenario_dataset(&spec, n, root.child_named("data").key())?;
            io::write_dataset(&out, &data)?;
            if let Some(path) = model {
                io::write_model(&path, &m)?;
            }
            print(&json!({ "omegaBarHat": report.omega_bar_hat, "mcStdErr": report.mc_std_err, "c": report.c }))?;
        }
        Command::Stattest { test, input, alpha, b, seed } => {
            let x = io::read_column(&input)?;
            let sorted = SortedSample::from_unsorted(x)?;
            let v = match test {
                TestKind::Ad => {
                    let stat = ad_statistic(&sorted)?;
                    let crit = ad_critical_value(alpha);
                    json!({ "statistic": stat, "critical": crit, "reject": crit.map(|c| stat > c) })
                }
                TestKind::Ks => {
                    let stat = ks_statistic(&sorted, normal_cdf);
                    let crit = ks_critical_value(alpha, sorted.len())?;
                    json!({ "statistic": stat, "critical": crit, "reject": stat > crit })
                }
                TestKind::Dip => {
                    let r = dip_test(&sorted, b, Stream::new(seed))?;
                    json!({ "statistic": r.dip, "pValue": r.p_value, "reject": r.p_value < alpha })
                }
            };
            print(&v)?;
        }
        Command::Fit { method, data, config, seed, runs, out } => {
            let data = io::read_dataset(&data)?;
            let mut cfg = SearchConfig::for_method(method);
            if let Some(path) = config {
                let patch: serde_json::Value = io::read_json(&path)?;
                cfg = io::overlay(&cfg, &patch)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let t = Instant::now();
            let r = best_of_runs(&data, method, runs, &cfg)?;
            let elapsed = t.elapsed().as_secs_f64();
            let labels: Vec<usize> = r.partition.labels().iter().map(|l| l + 1).collect();
            let v = json!({
                "method": method,
                "khat": r.k_hat,
                "labels": labels,
                "criterion": r.criterion,
                "trace": r.trace,
                "elapsedSeconds": elapsed,
                "model": r.model,
            });
            match out {
                Some(path) => io::write_json(&path, &v)?,
                None => print(&v)?,
            }
            log::info!("{method}: K = {} in {elapsed:.3} s", r.k_hat);
        }
        Command::Eval { pred, truth } => {
            let a = Partition::compact(&read_prediction(&pred)?);
            let b = Partition::compact(&io::read_labels(&truth)?);
            if a.n() != b.n() {
                bail!("label files differ in length ({} vs {})", a.n(), b.n());
            }
            print(&json!({ "ari": ari(&a, &b)?, "cari": cari(&a, &b)?, "khat": a.k() }))?;
        }
        Command::Sim { grid, out, manifest, workers, seed, timing, records, with_elapsed } => {
            let mut g: Grid = io::read_json(&grid)?;
            if let Some(s) = seed {
                g.master_seed = s;
            }
            let scenarios = g.scenarios()?;
            let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).map_or(PathBuf::from("."), PathBuf::from);
            fs::create_dir_all(&dir)?;
            let manifest = manifest.unwrap_or_else(|| dir.join("manifest.json"));
            io::write_json(&manifest, &harness::manifest(&g, &scenarios, workers))?;
            log::info!("{} scenarios, {} datasets each, {workers} workers", scenarios.len(), g.datasets);
            let t = Instant::now();
            let outcome = harness::run_grid(scenarios, workers)?;
            let create = |p: &PathBuf| {
                File::create(p).map(BufWriter::new).with_context(|| format!("cannot create {}", p.display()))
            };
            harness::write_results(create(&out)?, &outcome.aggregates, with_elapsed)?;
            if let Some(p) = timing {
                harness::write_timing(create(&p)?, &harness::timing_report(&outcome.records))?;
            }
            if let Some(p) = records {
                harness::write_records(create(&p)?, &outcome.records)?;
            }
            let failed = outcome.records.iter().filter(|r| r.failed()).count();
            log::info!("done in {:.1} s; {failed} failed runs", t.elapsed().as_secs_f64());
        }
        Command::Analyze { results, out, interactions, confidence, absorb } => {
            let rows = harness::read_results(&results)?;
            let out = analysis::run_effects(&rows, interactions, confidence, &absorb, &out)?;
            log::info!("selected {} groups; wrote {} files", out.analysis.selected.len(), out.files.len());
        }
        Command::Report { results, out, effects, effects_out } => {
            let rows = harness::read_results(&results)?;
            analysis::write_report(&rows, &out)?;
            if let Some(dir) = effects {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
                let dest = effects_out.unwrap_or_else(|| out.with_file_name(format!("{stem}_effects.csv")));
                analysis::collect_effects(&dir, &dest)?;
            }
        }
    }
    Ok(())
}
