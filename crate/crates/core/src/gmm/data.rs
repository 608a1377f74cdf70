use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::overlap::Provenance;
use crate::{Error, Result};

/// An `n × p` sample matrix with optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Matrix,
    /// Zero-based true component of every sample, when known.
    labels: Option<Vec<usize>>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(samples: Matrix) -> Result<Self> {
        if samples.rows() == 0 || samples.cols() == 0 {
            return Err(Error::InvalidInput("dataset needs n >= 1 and p >= 1".to_string()));
        }
        if samples.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".to_string()));
        }
        Ok(Dataset { samples, labels: None, provenance: None })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Dataset::new(Matrix::from_rows(rows))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn n(&self) -> usize {
        self.samples.rows()
    }

    pub fn p(&self) -> usize {
        self.samples.cols()
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Ground truth as a [`Partition`], if labels are present.
    pub fn true_partition(&self) -> Option<Partition> {
        self.labels.as_ref().map(|l| Partition::compact(l))
    }

    /// The rows listed in `idx`, as a new dataset without labels.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let p = self.p();
        let mut data = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            data.extend_from_slice(self.sample(i));
        }
        Dataset { samples: Matrix::from_vec(idx.len(), p, data), labels: None, provenance: None }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p()];
        for i in 0..self.n() {
            for (a, x) in m.iter_mut().zip(self.sample(i)) {
                *a += x;
            }
        }
        let n = self.n() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Maximum-likelihood covariance (divisor n).
    pub fn covariance(&self) -> Matrix {
        let mean = self.mean();
        let p = self.p();
        let mut c = Matrix::zeros(p, p);
        let mut d = vec![0.0; p];
        for i in 0..self.n() {
            for (dj, (x, m)) in d.iter_mut().zip(self.sample(i).iter().zip(&mean)) {
                *dj = x - m;
            }
            for a in 0..p {
                for b in a..p {
                    c[(a, b)] += d[a] * d[b];
                }
            }
        }
        let n = self.n() as f64;
        for a in 0..p {
            for b in a..p {
                let v = c[(a, b)] / n;
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        c
    }
}

/// Hard assignment of `n` samples to `k` nonempty clusters (labels `0..k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Accepts labels only if every cluster `0..=max` is used.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty partition".to_string()));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("partition has an empty cluster".to_string()));
        }
        Ok(Partition { labels, k })
    }

    /// Renumbers arbitrary labels to `0..k`, keeping their relative order.
    pub fn compact(labels: &[usize]) -> Self {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let relabeled = labels.iter().map(|l| ids.binary_search(l).expect("label present")).collect();
        Partition { labels: relabeled, k: ids.len() }
    }

    pub fn single(n: usize) -> Self {
        Partition { labels: vec![0; n], k: 1 }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Sample indices of every cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    /// Cluster centroids.
    pub fn centroids(&self, data: &Dataset) -> Matrix {
        let p = data.p();
        let mut c = Matrix::zeros(self.k, p);
        for (i, &l) in self.labels.iter().enumerate() {
            for (a, x) in c.row_mut(l).iter_mut().zip(data.sample(i)) {
                *a += x;
            }
        }
        for (l, &s) in self.sizes().iter().enumerate() {
            c.row_mut(l).iter_mut().for_each(|a| *a /= s as f64);
        }
        c
    }
}

/// Posterior membership weights, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    r: Matrix,
}

impl Responsibilities {
    pub(crate) fn from_matrix(r: Matrix) -> Self {
        Responsibilities { r }
    }

    /// One-hot responsibilities of a hard partition.
    pub fn from_partition(partition: &Partition) -> Self {
        let mut r = Matrix::zeros(partition.n(), partition.k());
        for (i, &l) in partition.labels().iter().enumerate() {
            r[(i, l)] = 1.0;
        }
        Responsibilities { r }
    }

    pub fn n(&self) -> usize {
        self.r.rows()
    }

    pub fn k(&self) -> usize {
        self.r.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.r.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.k()];
        for i in 0..self.n() {
            for (a, r) in s.iter_mut().zip(self.row(i)) {
                *a += r;
            }
        }
        s
    }

    /// Maximum-a-posteriori labels (ties go to the lowest index), compacted.
    pub fn map_partition(&self) -> Partition {
        let labels: Vec<usize> = (0..self.n())
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect();
        Partition::compact(&labels)
    }
}
