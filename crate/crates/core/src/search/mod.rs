//! The six cluster-count search algorithms.
//!
//! Every search returns a [`SearchResult`] whose criterion is lower-is-better
//! and comparable across runs of the same method on the same data.

mod components;
mod dipmeans;
mod gmeans;
mod kmeans;
mod mmlem;
mod pgmeans;
mod smlsom;
mod xmeans;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, split_init, KMEANS_MAX_ITER};
pub use smlsom::gaussian_kl;

use crate::gmm::{CovType, Dataset, GmmModel, Partition};
use crate::rng::Stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    XMeans,
    GMeans,
    DipMeans,
    PgMeans,
    MmlEm,
    Smlsom,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::XMeans, Method::GMeans, Method::DipMeans, Method::PgMeans, Method::MmlEm, Method::Smlsom];

    /// Identifier used in files and on the command line.
    pub fn id(self) -> &'static str {
        match self {
            Method::XMeans => "xmeans",
            Method::GMeans => "gmeans",
            Method::DipMeans => "dipmeans",
            Method::PgMeans => "pgmeans",
            Method::MmlEm => "mmlem",
            Method::Smlsom => "smlsom",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::XMeans => "X-means",
            Method::GMeans => "G-means",
            Method::DipMeans => "Dip-means",
            Method::PgMeans => "PG-means",
            Method::MmlEm => "MML-EM",
            Method::Smlsom => "SMLSOM",
        }
    }

    /// Whether repeated runs can differ.
    pub fn is_stochastic(self) -> bool {
        self != Method::GMeans
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.id() == key)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown method '{s}'")))
    }
}

/// How a cluster is seeded before its local 2-means split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitInit {
    /// `μ ± u √(2λ/π)` from the principal axis.
    Principal,
    /// A random member `x` and its reflection `2μ − x`.
    Reflection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub alpha: f64,
    pub v_thd: f64,
    pub h: usize,
    pub b: usize,
    pub epsilon: f64,
    pub beta: f64,
    /// SOM steps per learning phase; `None` means `n`.
    pub tau_max: Option<usize>,
    pub seed: u64,
    pub cov_type: CovType,
    pub split_init: SplitInit,
    pub em_restarts: usize,
    pub max_em_iter: usize,
}

impl SearchConfig {
    /// Hyperparameter defaults of `method`.
    pub fn for_method(method: Method) -> Self {
        let base = SearchConfig {
            k_min: 1,
            k_max: 50,
            alpha: 1e-4,
            v_thd: 0.01,
            h: 12,
            b: 1000,
            epsilon: 1e-4,
            beta: 15.0,
            tau_max: None,
            seed: 0,
            cov_type: CovType::Full,
            split_init: SplitInit::Reflection,
            em_restarts: 10,
            max_em_iter: 500,
        };
        match method {
            Method::XMeans => base,
            Method::GMeans => SearchConfig { split_init: SplitInit::Principal, ..base },
            Method::DipMeans => SearchConfig { alpha: 1e-16, ..base },
            Method::PgMeans => SearchConfig { alpha: 1e-3, ..base },
            Method::MmlEm | Method::Smlsom => SearchConfig { k_max: 20, ..base },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_max < self.k_min {
            return Err(Error::InvalidInput("need 1 <= Kmin <= Kmax".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain("significance level must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain("EM tolerance must be positive"));
        }
        if self.h == 0 || self.b == 0 || self.em_restarts == 0 || self.max_em_iter == 0 {
            return Err(Error::InvalidInput("counts must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Domain("KL threshold must be positive"));
        }
        Ok(())
    }
}

/// One accepted (or, for tests, evaluated) structural move.
///
/// For X-means the scores are the local BIC of the unsplit and split cluster;
/// for G-means the A²* statistic and its critical value; for Dip-means the
/// split-viewer ratio and its threshold; for PG-means the largest KS
/// statistic and its threshold; for MML-EM and SMLSOM the criterion before
/// and after an annihilation or merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Move {
    pub k_before: usize,
    pub k_after: usize,
    pub score_before: f64,
    pub score_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchResult {
    pub method: Method,
    pub partition: Partition,
    pub k_hat: usize,
    pub model: Option<GmmModel>,
    /// The method's own selection score; lower is better.
    pub criterion: f64,
    /// `(K, criterion)` at every visited configuration, in order.
    pub trace: Vec<(usize, f64)>,
    pub moves: Vec<Move>,
    /// Wall-clock seconds; filled in by callers that can measure time.
    pub elapsed: f64,
}

impl SearchResult {
    fn new(method: Method, partition: Partition, model: Option<GmmModel>, criterion: f64) -> Self {
        SearchResult {
            method,
            k_hat: partition.k(),
            partition,
            model,
            criterion,
            trace: Vec::new(),
            moves: Vec::new(),
            elapsed: 0.0,
        }
    }
}

/// One run of `method` with `config.seed`. Same as [`best_of_runs`] with `R = 1`.
pub fn search(data: &Dataset, method: Method, config: &SearchConfig) -> Result<SearchResult> {
    run(data, method, config, Stream::new(config.seed).child(0))
}

/// Runs `method` `runs` times on distinct streams and keeps the lowest criterion.
/// G-means is deterministic and always runs once.
pub fn best_of_runs(data: &Dataset, method: Method, runs: usize, config: &SearchConfig) -> Result<SearchResult> {
    if runs == 0 {
        return Err(Error::InvalidInput("need at least one run".into()));
    }
    let runs = if method.is_stochastic() { runs } else { 1 };
    let root = Stream::new(config.seed);
    let mut best: Option<SearchResult> = None;
    let mut last_err = None;
    for r in 0..runs {
        match run(data, method, config, root.child(r as u64)) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.criterion < b.criterion) {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| Error::AllRunsFailed { runs, last: Box::new(last_err.expect("a failure")) })
}

fn run(data: &Dataset, method: Method, config: &SearchConfig, stream: Stream) -> Result<SearchResult> {
    config.validate()?;
    let res = match method {
        Method::XMeans => xmeans::xmeans(data, config, stream),
        Method::GMeans => gmeans::gmeans(data, config),
        Method::DipMeans => dipmeans::dipmeans(data, config, stream),
        Method::PgMeans => pgmeans::pgmeans(data, config, stream),
        Method::MmlEm => mmlem::mmlem(data, config, stream),
        Method::Smlsom => smlsom::smlsom(data, config, stream),
    }?;
    debug_assert_eq!(res.partition.k(), res.k_hat);
    Ok(res)
}

/// `min(k, n)` distinct sample indices drawn uniformly.
pub(crate) fn distinct_indices<R: rand::Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let k = k.min(n);
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Partition of the data by `k_min` random centers refined with k-means.
pub(crate) fn initial_partition<R: rand::Rng>(
    data: &Dataset,
    k_min: usize,
    rng: &mut R,
) -> (Partition, crate::linalg::Matrix) {
    if k_min <= 1 {
        let part = Partition::single(data.n());
        let centers = part.centroids(data);
        return (part, centers);
    }
    let idx = distinct_indices(data.n(), k_min, rng);
    let rows: Vec<&[f64]> = idx.iter().map(|&i| data.sample(i)).collect();
    kmeans(data, &crate::linalg::Matrix::from_rows(&rows), KMEANS_MAX_ITER)
}
