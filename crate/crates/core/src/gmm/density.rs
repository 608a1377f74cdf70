use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, GmmModel, Responsibilities};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::Stream;
use crate::{Error, Result};

/// Log density of `N(mean, cov)` at `x`, through a Cholesky factor of `cov`.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], cov: &Matrix) -> Result<f64> {
    let p = mean.len();
    if x.len() != p {
        return Err(Error::Dimension { expected: p, found: x.len() });
    }
    if cov.rows() != p || cov.cols() != p {
        return Err(Error::Dimension { expected: p, found: cov.rows() });
    }
    let chol = Cholesky::new(cov).ok_or(Error::SingularCovariance)?;
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let q = chol.mahalanobis_sq(&d);
    Ok(-0.5 * (p as f64 * (2.0 * core::f64::consts::PI).ln() + chol.log_det() + q))
}

fn check_dims(model: &GmmModel, data: &Dataset) -> Result<()> {
    if model.p() != data.p() {
        return Err(Error::Dimension { expected: model.p(), found: data.p() });
    }
    Ok(())
}

/// `Σ_i log Σ_k π_k f(x_i | μ_k, Σ_k)`.
pub fn mixture_log_likelihood(model: &GmmModel, data: &Dataset) -> Result<f64> {
    check_dims(model, data)?;
    let prep = model.prepare()?;
    let mut joint = vec![0.0; model.k()];
    let mut scratch = vec![0.0; model.p()];
    Ok((0..data.n()).map(|i| prep.joint_log_densities(data.sample(i), &mut joint, &mut scratch)).sum())
}

/// Posterior component probabilities of every sample.
pub fn e_step(model: &GmmModel, data: &Dataset) -> Result<Responsibilities> {
    e_step_with_log_likelihood(model, data).map(|(r, _)| r)
}

/// E-step that also returns the log-likelihood it computed along the way.
pub fn e_step_with_log_likelihood(model: &GmmModel, data: &Dataset) -> Result<(Responsibilities, f64)> {
    check_dims(model, data)?;
    let prep = model.prepare()?;
    let k = model.k();
    let mut r = Matrix::zeros(data.n(), k);
    let mut scratch = vec![0.0; model.p()];
    let mut ll = 0.0;
    for i in 0..data.n() {
        let row = r.row_mut(i);
        let lse = prep.joint_log_densities(data.sample(i), row, &mut scratch);
        ll += lse;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok((Responsibilities::from_matrix(r), ll))
}

/// Draws `n` labelled samples; the component of each draw is recorded as its label.
pub fn sample_model(model: &GmmModel, n: usize, stream: Stream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let p = model.p();
    let chol: Vec<Cholesky> =
        model.covariances().iter().map(|c| Cholesky::new(c).ok_or(Error::SingularCovariance)).collect::<Result<_>>()?;
    let mut cumulative = Vec::with_capacity(model.k());
    let mut acc = 0.0;
    for w in model.weights() {
        acc += w;
        cumulative.push(acc);
    }
    let mut rng = stream.rng();
    let mut data = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cumulative.iter().position(|&c| u < c).unwrap_or(model.k() - 1);
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let x = chol[k].mul_lower(&z);
        data.extend(x.iter().zip(&model.means()[k]).map(|(a, m)| a + m));
        labels.push(k);
    }
    Dataset::new(Matrix::from_vec(n, p, data))?.with_labels(labels)
}
