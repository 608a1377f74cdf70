//! Pair-counting agreement between partitions.

use alloc::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gmm::Partition;
use crate::stats::probit;
use crate::{Error, Result};

/// Pair counts of a two-way contingency table.
///
/// `t` counts pairs together in both partitions, `p` pairs together in the
/// first, `q` pairs together in the second, `h = n(n−1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCounts {
    pub t: f64,
    pub p: f64,
    pub q: f64,
    pub h: f64,
    pub n: usize,
}

fn choose2(m: usize) -> f64 {
    let m = m as f64;
    m * (m - 1.0) / 2.0
}

pub fn pair_counts(u: &Partition, v: &Partition) -> Result<PairCounts> {
    if u.n() != v.n() {
        return Err(Error::Dimension { expected: u.n(), found: v.n() });
    }
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&a, &b) in u.labels().iter().zip(v.labels()) {
        *table.entry((a, b)).or_default() += 1;
    }
    let t = table.values().map(|&m| choose2(m)).sum();
    let p = u.sizes().into_iter().map(choose2).sum();
    let q = v.sizes().into_iter().map(choose2).sum();
    Ok(PairCounts { t, p, q, h: choose2(u.n()), n: u.n() })
}

impl PairCounts {
    pub fn expected(&self) -> f64 {
        self.q * self.p / self.h
    }

    pub fn max_index(&self) -> f64 {
        0.5 * (self.q + self.p)
    }

    /// `(T − E)/(M − E)`, or zero when `M = E`.
    pub fn ari(&self) -> f64 {
        let e = self.expected();
        let m = self.max_index();
        if m == e {
            0.0
        } else {
            (self.t - e) / (m - e)
        }
    }

    /// `(T − E + n/2)/(M − E + n)`.
    pub fn cari(&self) -> f64 {
        let e = self.expected();
        let n = self.n as f64;
        (self.t - e + 0.5 * n) / (self.max_index() - e + n)
    }
}

pub fn ari(u: &Partition, v: &Partition) -> Result<f64> {
    check_size(u)?;
    Ok(pair_counts(u, v)?.ari())
}

pub fn cari(u: &Partition, v: &Partition) -> Result<f64> {
    check_size(u)?;
    Ok(pair_counts(u, v)?.cari())
}

fn check_size(u: &Partition) -> Result<()> {
    if u.n() < 2 {
        return Err(Error::InvalidInput("pair counting needs n >= 2".into()));
    }
    Ok(())
}

/// `(K̂ − K*)/(K* − 1)`.
pub fn k_deviation(k_hat: f64, k_star: usize) -> Result<f64> {
    if k_star < 2 {
        return Err(Error::Domain("K* must be at least 2"));
    }
    Ok((k_hat - k_star as f64) / (k_star as f64 - 1.0))
}

/// Probit of a mean cARI.
pub fn response_transform(cari_mean: f64) -> Result<f64> {
    probit(cari_mean)
}
