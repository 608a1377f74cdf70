use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

/// Covariance structure imposed during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovType {
    /// Unconstrained covariance per component.
    #[default]
    Full,
    /// One `σ² I` shared by all components.
    SphericalShared,
    /// `σ_k² I` per component.
    SphericalPerCluster,
    /// One full covariance shared by all components.
    FullShared,
}

impl CovType {
    pub const ALL: [CovType; 4] =
        [CovType::Full, CovType::SphericalShared, CovType::SphericalPerCluster, CovType::FullShared];

    /// Number of free parameters of a `k`-component, `p`-dimensional mixture.
    pub fn free_parameters(self, k: usize, p: usize) -> usize {
        let weights = k - 1;
        let means = k * p;
        let cov = match self {
            CovType::Full => k * p * (p + 1) / 2,
            CovType::SphericalShared => 1,
            CovType::SphericalPerCluster => k,
            CovType::FullShared => p * (p + 1) / 2,
        };
        weights + means + cov
    }
}

/// A Gaussian mixture `Σ_k π_k N(μ_k, Σ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Matrix>,
}

impl GmmModel {
    /// Validates and builds a model. Weights must be positive and sum to one
    /// (within 1e-9; they are renormalized exactly), covariances symmetric
    /// positive definite, and all shapes consistent.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Matrix>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidInput("mixture needs at least one component".to_string()));
        }
        if means.len() != k {
            return Err(Error::Dimension { expected: k, found: means.len() });
        }
        if covariances.len() != k {
            return Err(Error::Dimension { expected: k, found: covariances.len() });
        }
        let p = means[0].len();
        if p == 0 {
            return Err(Error::InvalidInput("mixture needs p >= 1".to_string()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("mixing weights must be positive".to_string()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("mixing weights sum to {total}, not 1")));
        }
        for (m, c) in means.iter().zip(&covariances) {
            if m.len() != p {
                return Err(Error::Dimension { expected: p, found: m.len() });
            }
            if c.rows() != p || c.cols() != p {
                return Err(Error::Dimension { expected: p, found: c.rows() });
            }
            let scale = c.trace().abs().max(1e-300);
            if !c.is_symmetric(1e-10 * scale) {
                return Err(Error::SingularCovariance);
            }
            if Cholesky::new(c).is_none() {
                return Err(Error::SingularCovariance);
            }
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(GmmModel { weights, means, covariances })
    }

    /// Builds a model whose weights are normalized from arbitrary positive masses.
    pub fn from_masses(masses: &[f64], means: Vec<Vec<f64>>, covariances: Vec<Matrix>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        GmmModel::new(masses.iter().map(|m| m / total).collect(), means, covariances)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix] {
        &self.covariances
    }

    /// Same components with every covariance multiplied by `c`.
    pub fn with_scaled_covariances(&self, c: f64) -> GmmModel {
        GmmModel {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariances: self.covariances.iter().map(|s| s.scaled(c)).collect(),
        }
    }

    /// Components reordered so that new component `i` is old `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> GmmModel {
        GmmModel {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            means: order.iter().map(|&i| self.means[i].clone()).collect(),
            covariances: order.iter().map(|&i| self.covariances[i].clone()).collect(),
        }
    }

    /// Per-component data needed for fast density evaluation.
    pub fn prepare(&self) -> Result<PreparedGmm> {
        let p = self.p();
        let half_p_log_2pi = 0.5 * p as f64 * (2.0 * core::f64::consts::PI).ln();
        let mut chol = Vec::with_capacity(self.k());
        let mut log_norm = Vec::with_capacity(self.k());
        for c in &self.covariances {
            let f = Cholesky::new(c).ok_or(Error::SingularCovariance)?;
            log_norm.push(-half_p_log_2pi - 0.5 * f.log_det());
            chol.push(f);
        }
        Ok(PreparedGmm {
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            means: self.means.clone(),
            chol,
            log_norm,
        })
    }
}

/// Cholesky factors and normalizing constants of a [`GmmModel`].
#[derive(Debug, Clone)]
pub struct PreparedGmm {
    pub(crate) log_weights: Vec<f64>,
    pub(crate) means: Vec<Vec<f64>>,
    pub(crate) chol: Vec<Cholesky>,
    pub(crate) log_norm: Vec<f64>,
}

impl PreparedGmm {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// `log f(x | μ_k, Σ_k)` using `scratch` (length p) as workspace.
    #[inline]
    pub fn component_log_density(&self, k: usize, x: &[f64], scratch: &mut [f64]) -> f64 {
        for ((s, xi), mi) in scratch.iter_mut().zip(x).zip(&self.means[k]) {
            *s = xi - mi;
        }
        self.chol[k].solve_lower_in_place(scratch);
        let q: f64 = scratch.iter().map(|z| z * z).sum();
        self.log_norm[k] - 0.5 * q
    }

    /// Fills `out[k] = log π_k + log f(x | θ_k)` and returns the log-sum-exp.
    #[inline]
    pub fn joint_log_densities(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) -> f64 {
        for k in 0..self.k() {
            out[k] = self.log_weights[k] + self.component_log_density(k, x, scratch);
        }
        log_sum_exp(out)
    }
}

/// `log Σ exp(v_i)` without overflow; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    #[serde(rename = "K")]
    k: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<ModelRepr> for GmmModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        if r.k != r.weights.len() {
            return Err(Error::Dimension { expected: r.k, found: r.weights.len() });
        }
        let covs = r.covariances.iter().map(|c| Matrix::from_rows(c)).collect();
        GmmModel::new(r.weights, r.means, covs)
    }
}

impl From<GmmModel> for ModelRepr {
    fn from(m: GmmModel) -> Self {
        ModelRepr {
            k: m.k(),
            covariances: m.covariances.iter().map(|c| c.to_rows()).collect(),
            weights: m.weights,
            means: m.means,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_models() {
        let id = Matrix::identity(2);
        assert!(GmmModel::new(vec![0.5, 0.6], vec![vec![0.0; 2]; 2], vec![id.clone(); 2]).is_err());
        assert!(GmmModel::new(vec![1.0, 0.0], vec![vec![0.0; 2]; 2], vec![id.clone(); 2]).is_err());
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert_eq!(GmmModel::new(vec![1.0], vec![vec![0.0; 2]], vec![bad]), Err(Error::SingularCovariance));
        assert!(GmmModel::new(vec![1.0], vec![vec![0.0; 3]], vec![id]).is_err());
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(CovType::Full.free_parameters(1, 1), 2);
        assert_eq!(CovType::Full.free_parameters(2, 2), 11);
        assert_eq!(CovType::SphericalShared.free_parameters(3, 2), 2 + 6 + 1);
        assert_eq!(CovType::SphericalPerCluster.free_parameters(3, 2), 2 + 6 + 3);
        assert_eq!(CovType::FullShared.free_parameters(3, 2), 2 + 6 + 3);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
