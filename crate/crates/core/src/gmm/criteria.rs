use super::{density::mixture_log_likelihood, CovType, Dataset, GmmModel, Partition};
use crate::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Whole-partition BIC of the centroid model with a pooled spherical variance.
///
/// The model uses the cluster centroids as means, weights `n_k / n`, and
/// `σ² = Σ_k Σ_{i∈S_k} ‖x_i − μ_k‖² / (n − K)`. Returns
/// `−ℓ_K + K(p+1)/2 · log n`; lower is better.
pub fn bic_xmeans(partition: &Partition, data: &Dataset) -> Result<f64> {
    if partition.n() != data.n() {
        return Err(Error::Dimension { expected: data.n(), found: partition.n() });
    }
    let n = data.n();
    let k = partition.k();
    let p = data.p() as f64;
    if n <= k {
        return Err(Error::DegenerateVariance { n, k });
    }
    let centroids = partition.centroids(data);
    let ss: f64 = (0..n).map(|i| crate::linalg::sq_dist(data.sample(i), centroids.row(partition.labels()[i]))).sum();
    let nf = n as f64;
    let var = ss / (nf - k as f64);
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance { n, k });
    }
    let weight_term: f64 = partition.sizes().iter().map(|&s| s as f64 * (s as f64 / nf).ln()).sum();
    let log_lik = weight_term - 0.5 * nf * p * (2.0 * core::f64::consts::PI * var).ln() - ss / (2.0 * var);
    Ok(-log_lik + 0.5 * (k as f64) * (p + 1.0) * nf.ln())
}

/// `−ℓ + (m/2) log n` with `m` the free-parameter count of `cov_type`.
pub fn standard_bic(model: &GmmModel, data: &Dataset, cov_type: CovType) -> Result<f64> {
    let ll = mixture_log_likelihood(model, data)?;
    Ok(standard_bic_from_log_likelihood(ll, model.k(), data.p(), data.n(), cov_type))
}

pub fn standard_bic_from_log_likelihood(ll: f64, k: usize, p: usize, n: usize, cov_type: CovType) -> f64 {
    let m = cov_type.free_parameters(k, p) as f64;
    -ll + 0.5 * m * (n as f64).ln()
}
