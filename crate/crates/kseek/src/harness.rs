//! Factorial simulation: scenario grids, per-dataset runs, aggregation and
//! the results, timing and manifest files.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use kseek_core::eval::{cari, k_deviation};
use kseek_core::overlap::{generate_scenario_dataset, CovStructure, OverlapSpec, DEFAULT_MC_SAMPLES};
use kseek_core::search::{best_of_runs, Method, SearchConfig};
use kseek_core::Stream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::overlay;

/// A covariance level written either as its table index (1–4) or its name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CovRepr", into = "usize")]
pub struct CovLevel(pub CovStructure);

#[derive(Deserialize)]
#[serde(untagged)]
enum CovRepr {
    Index(usize),
    Name(CovStructure),
}

impl TryFrom<CovRepr> for CovLevel {
    type Error = String;
    fn try_from(r: CovRepr) -> std::result::Result<Self, String> {
        match r {
            CovRepr::Index(i) => CovStructure::from_index(i).map(CovLevel).ok_or(format!("covType {i} not in 1..=4")),
            CovRepr::Name(c) => Ok(CovLevel(c)),
        }
    }
}

impl From<CovLevel> for usize {
    fn from(c: CovLevel) -> usize {
        c.0.index()
    }
}

fn default_datasets() -> usize {
    10
}
fn default_runs() -> usize {
    3
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_mc() -> usize {
    DEFAULT_MC_SAMPLES
}

/// Level lists of the five data factors plus the protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub omega_bar: Vec<f64>,
    pub k_star: Vec<usize>,
    pub cov_type: Vec<CovLevel>,
    #[serde(default = "default_datasets")]
    pub datasets: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Per-method overlays on the default hyperparameters, keyed by method id.
    #[serde(default)]
    pub config: BTreeMap<Method, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub id: String,
    pub n: usize,
    pub p: usize,
    pub omega_bar: f64,
    pub k_star: usize,
    pub cov_type: CovStructure,
    pub datasets: usize,
    pub runs: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub mc_samples: usize,
    #[serde(skip)]
    pub configs: BTreeMap<Method, SearchConfig>,
}

impl Scenario {
    /// One cell with default hyperparameters.
    pub fn new(n: usize, p: usize, omega_bar: f64, k_star: usize, cov_type: CovStructure) -> Self {
        Scenario {
            id: scenario_id(n, p, omega_bar, k_star, cov_type),
            n,
            p,
            omega_bar,
            k_star,
            cov_type,
            datasets: default_datasets(),
            runs: default_runs(),
            methods: default_methods(),
            master_seed: 0,
            mc_samples: DEFAULT_MC_SAMPLES,
            configs: Method::ALL.iter().map(|&m| (m, SearchConfig::for_method(m))).collect(),
        }
    }

    fn stream(&self) -> Stream {
        Stream::new(self.master_seed).child_named(&self.id)
    }
}

pub fn scenario_id(n: usize, p: usize, omega_bar: f64, k_star: usize, cov: CovStructure) -> String {
    format!("n{n}_p{p}_w{omega_bar}_k{k_star}_c{}", cov.index())
}

impl Grid {
    /// Scenarios in a fixed nesting order: n, p, ω̄, K*, covType.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        if self.runs == 0 || self.datasets == 0 {
            bail!("datasets and runs must be positive");
        }
        let mut configs = BTreeMap::new();
        for &m in &Method::ALL {
            let base = SearchConfig::for_method(m);
            let cfg = match self.config.get(&m) {
                Some(patch) => overlay(&base, patch).with_context(|| format!("config for {m}"))?,
                None => base,
            };
            cfg.validate().with_context(|| format!("config for {m}"))?;
            configs.insert(m, cfg);
        }
        let mut out = Vec::new();
        for &n in &self.n {
            for &p in &self.p {
                for &w in &self.omega_bar {
                    for &k in &self.k_star {
                        for &CovLevel(c) in &self.cov_type {
                            out.push(Scenario {
                                id: scenario_id(n, p, w, k, c),
                                n,
                                p,
                                omega_bar: w,
                                k_star: k,
                                cov_type: c,
                                datasets: self.datasets,
                                runs: self.runs,
                                methods: self.methods.clone(),
                                master_seed: self.master_seed,
                                mc_samples: self.mc_samples,
                                configs: configs.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_id: String,
    pub method: Method,
    pub dataset: usize,
    pub k_hat: Option<usize>,
    pub cari: Option<f64>,
    pub criterion: Option<f64>,
    pub elapsed_s: f64,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub scenario_id: String,
    pub n: usize,
    pub p: usize,
    pub omega_bar: f64,
    pub k_star: usize,
    /// Table index 1–4.
    pub cov_type: usize,
    pub method: Method,
    pub mean_cari: f64,
    pub mean_khat: f64,
    pub k_deviation: f64,
    pub failures: usize,
    #[serde(default)]
    pub mean_elapsed_s: Option<f64>,
}

/// Records of one dataset replicate: every method on the same data.
fn run_unit(s: &Scenario, d: usize) -> Vec<RunRecord> {
    let stream = s.stream().child(d as u64);
    let mut spec = OverlapSpec::new(s.k_star, s.p, s.omega_bar, s.cov_type, stream.child_named("model").key());
    spec.mc_samples = s.mc_samples;
    let fail = |m: Method, why: String| RunRecord {
        scenario_id: s.id.clone(),
        method: m,
        dataset: d,
        k_hat: None,
        cari: None,
        criterion: None,
        elapsed_s: 0.0,
        failure: Some(why),
    };
    let data = match generate_scenario_dataset(&spec, s.n, stream.child_named("data").key()) {
        Ok((_, data, _)) => data,
        Err(e) => {
            log::warn!("{} dataset {d}: generation failed: {e}", s.id);
            return s.methods.iter().map(|&m| fail(m, format!("dataset generation: {e}"))).collect();
        }
    };
    let truth = data.true_partition().expect("generated data is labelled");
    s.methods
        .iter()
        .map(|&m| {
            let cfg = s.configs[&m].clone().with_seed(stream.child_named(m.id()).key());
            let t = Instant::now();
            let res = best_of_runs(&data, m, s.runs, &cfg);
            let elapsed_s = t.elapsed().as_secs_f64();
            match res.and_then(|r| Ok((cari(&r.partition, &truth)?, r))) {
                Ok((c, r)) => RunRecord {
                    scenario_id: s.id.clone(),
                    method: m,
                    dataset: d,
                    k_hat: Some(r.k_hat),
                    cari: Some(c),
                    criterion: Some(r.criterion),
                    elapsed_s,
                    failure: None,
                },
                Err(e) => {
                    log::warn!("{} dataset {d} {m}: {e}", s.id);
                    RunRecord { elapsed_s, ..fail(m, e.to_string()) }
                }
            }
        })
        .collect()
}

/// Per-method aggregates over the non-failed records of `s`.
pub fn aggregate(s: &Scenario, records: &[RunRecord]) -> Vec<AggregateRecord> {
    s.methods
        .iter()
        .map(|&m| {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| r.scenario_id == s.id && r.method == m).collect();
            let ok: Vec<&&RunRecord> = mine.iter().filter(|r| !r.failed()).collect();
            let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let mean_khat = mean(&|r| r.k_hat.unwrap_or(0) as f64);
            AggregateRecord {
                scenario_id: s.id.clone(),
                n: s.n,
                p: s.p,
                omega_bar: s.omega_bar,
                k_star: s.k_star,
                cov_type: s.cov_type.index(),
                method: m,
                mean_cari: mean(&|r| r.cari.unwrap_or(f64::NAN)),
                mean_khat,
                k_deviation: k_deviation(mean_khat, s.k_star).unwrap_or(f64::NAN),
                failures: mine.len() - ok.len(),
                mean_elapsed_s: Some(mean(&|r| r.elapsed_s)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub scenarios: Vec<Scenario>,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// Runs every (scenario, dataset) unit on a pool of `workers` threads.
/// Output order depends only on the grid, never on scheduling.
pub fn run_grid(scenarios: Vec<Scenario>, workers: usize) -> Result<GridOutcome> {
    let units: Vec<(usize, usize)> =
        scenarios.iter().enumerate().flat_map(|(i, s)| (0..s.datasets).map(move |d| (i, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let per_unit: Vec<Vec<RunRecord>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(i, d)| {
                let r = run_unit(&scenarios[i], d);
                log::debug!("{} dataset {d} done", scenarios[i].id);
                r
            })
            .collect()
    });
    let records: Vec<RunRecord> = per_unit.into_iter().flatten().collect();
    let aggregates = scenarios.iter().flat_map(|s| aggregate(s, &records)).collect();
    Ok(GridOutcome { scenarios, records, aggregates })
}

/// One scenario on the current thread.
pub fn run_scenario(s: &Scenario) -> (Vec<RunRecord>, Vec<AggregateRecord>) {
    let records: Vec<RunRecord> = (0..s.datasets).flat_map(|d| run_unit(s, d)).collect();
    let agg = aggregate(s, &records);
    (records, agg)
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "scenario_id",
    "n",
    "p",
    "omega_bar",
    "k_star",
    "cov_type",
    "method",
    "mean_cari",
    "mean_khat",
    "k_deviation",
    "failures",
    "mean_elapsed_s",
];

/// Aggregates as CSV. Without `with_timing` the wall-clock column is left
/// out so the file is a pure function of the grid and seed.
pub fn write_results<W: std::io::Write>(out: W, rows: &[AggregateRecord], with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let cols = if with_timing { &RESULT_COLUMNS[..] } else { &RESULT_COLUMNS[..11] };
    w.write_record(cols)?;
    for r in rows {
        let mut rec = vec![
            r.scenario_id.clone(),
            r.n.to_string(),
            r.p.to_string(),
            r.omega_bar.to_string(),
            r.k_star.to_string(),
            r.cov_type.to_string(),
            r.method.id().to_string(),
            r.mean_cari.to_string(),
            r.mean_khat.to_string(),
            r.k_deviation.to_string(),
            r.failures.to_string(),
        ];
        if with_timing {
            rec.push(r.mean_elapsed_s.map_or(String::new(), |v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<AggregateRecord>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    rdr.deserialize().map(|r| r.with_context(|| format!("bad row in {}", path.display()))).collect()
}

pub fn write_records<W: std::io::Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario_id", "method", "dataset", "khat", "cari", "criterion", "elapsed_s", "failure"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            r.scenario_id.clone(),
            r.method.id().to_string(),
            r.dataset.to_string(),
            opt(r.k_hat.map(|v| v.to_string())),
            opt(r.cari.map(|v| v.to_string())),
            opt(r.criterion.map(|v| v.to_string())),
            r.elapsed_s.to_string(),
            opt(r.failure.clone()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub scenario_id: String,
    pub method: Method,
    pub count: usize,
    pub median_s: f64,
    pub q1_s: f64,
    pub q3_s: f64,
    pub iqr_s: f64,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and IQR of elapsed time per (scenario, method), in first-seen order.
pub fn timing_report(records: &[RunRecord]) -> Vec<TimingRow> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    let mut times: BTreeMap<(String, Method), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.failed()) {
        let key = (r.scenario_id.clone(), r.method);
        if !times.contains_key(&key) {
            keys.push(key.clone());
        }
        times.entry(key).or_default().push(r.elapsed_s);
    }
    keys.into_iter()
        .map(|k| {
            let mut v = times.remove(&k).expect("key recorded");
            v.sort_by(f64::total_cmp);
            let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
            TimingRow {
                scenario_id: k.0,
                method: k.1,
                count: v.len(),
                median_s: med,
                q1_s: q1,
                q3_s: q3,
                iqr_s: q3 - q1,
            }
        })
        .collect()
}

pub fn write_timing<W: std::io::Write>(out: W, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub master_seed: u64,
    pub workers: usize,
    pub grid: &'a Grid,
    pub scenarios: Vec<ManifestScenario>,
    pub configs: BTreeMap<Method, SearchConfig>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestScenario {
    pub id: String,
    pub stream_key: u64,
}

pub fn manifest<'a>(grid: &'a Grid, scenarios: &[Scenario], workers: usize) -> Manifest<'a> {
    Manifest {
        version: env!("CARGO_PKG_VERSION"),
        master_seed: grid.master_seed,
        workers,
        grid,
        scenarios: scenarios
            .iter()
            .map(|s| ManifestScenario { id: s.id.clone(), stream_key: s.stream().key() })
            .collect(),
        configs: scenarios.first().map(|s| s.configs.clone()).unwrap_or_default(),
    }
}
