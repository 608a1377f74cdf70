//! Free-standing Gaussian components shared by MML-EM and SMLSOM.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use super::distinct_indices;
use crate::gmm::em::repair;
use crate::gmm::{CovType, Dataset, GmmModel};
use crate::linalg::{Cholesky, Matrix};

#[derive(Debug, Clone)]
pub(super) struct Component {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    chol: Cholesky,
    log_norm: f64,
}

impl Component {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Option<Self> {
        let chol = Cholesky::new(&cov)?;
        let p = mean.len() as f64;
        let log_norm = -0.5 * (p * (2.0 * core::f64::consts::PI).ln() + chol.log_det());
        Some(Component { mean, cov, chol, log_norm })
    }

    #[inline]
    pub fn log_density(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        for ((s, xi), mi) in scratch.iter_mut().zip(x).zip(&self.mean) {
            *s = xi - mi;
        }
        self.chol.solve_lower_in_place(scratch);
        self.log_norm - 0.5 * scratch.iter().map(|z| z * z).sum::<f64>()
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    pub fn inverse(&self) -> Matrix {
        self.chol.inverse()
    }

    /// `log f(x_i)` for every sample.
    pub fn column(&self, data: &Dataset) -> Vec<f64> {
        let mut scratch = vec![0.0; data.p()];
        (0..data.n()).map(|i| self.log_density(data.sample(i), &mut scratch)).collect()
    }
}

/// Whether `cov_type` asks for isotropic components.
pub(super) fn spherical(cov_type: CovType) -> bool {
    matches!(cov_type, CovType::SphericalPerCluster | CovType::SphericalShared)
}

/// Free parameters of one component (mean plus covariance).
pub(super) fn params_per_component(p: usize, spherical: bool) -> usize {
    if spherical {
        p + 1
    } else {
        p + p * (p + 1) / 2
    }
}

/// Weighted maximum-likelihood component; `None` if the weights vanish or
/// the covariance cannot be repaired.
pub(super) fn weighted_fit(data: &Dataset, w: &[f64], spherical: bool) -> Option<Component> {
    let p = data.p();
    let mass: f64 = w.iter().sum();
    if !(mass > 10.0 * f64::EPSILON) {
        return None;
    }
    let mut mean = vec![0.0; p];
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            for (m, x) in mean.iter_mut().zip(data.sample(i)) {
                *m += wi * x;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= mass);
    let mut cov = Matrix::zeros(p, p);
    let mut d = vec![0.0; p];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for ((dv, x), m) in d.iter_mut().zip(data.sample(i)).zip(&mean) {
            *dv = x - m;
        }
        let s = cov.as_mut_slice();
        for a in 0..p {
            let wa = wi * d[a];
            for b in a..p {
                s[a * p + b] += wa * d[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    cov.scale(1.0 / mass);
    if spherical {
        cov = Matrix::scaled_identity(p, cov.trace() / p as f64);
    }
    let cov = repair(cov, 0).ok()?;
    Component::new(mean, cov)
}

/// `k` components centered on distinct random samples with covariance
/// `0.1 · (tr Σ̂ / p) I`.
pub(super) fn initial_components<R: Rng>(data: &Dataset, k: usize, rng: &mut R) -> Vec<Component> {
    let p = data.p();
    let scale = 0.1 * data.covariance().trace() / p as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    distinct_indices(data.n(), k, rng)
        .into_iter()
        .map(|i| Component::new(data.sample(i).to_vec(), Matrix::scaled_identity(p, scale)).expect("positive scale"))
        .collect()
}

/// Builds a model from weighted components, skipping zero weights.
pub(super) fn to_model(weights: &[f64], comps: &[Component]) -> Option<GmmModel> {
    let (w, c): (Vec<f64>, Vec<&Component>) =
        weights.iter().zip(comps).filter(|(w, _)| **w > 0.0).map(|(w, c)| (*w, c)).unzip();
    GmmModel::from_masses(&w, c.iter().map(|c| c.mean.clone()).collect(), c.iter().map(|c| c.cov.clone()).collect())
        .ok()
}
