//! Expectation-maximization under the four covariance constraints.

use alloc::vec;
use alloc::vec::Vec;

use super::density::e_step_with_log_likelihood;
use super::{CovType, Dataset, GmmModel, Partition, Responsibilities};
use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

/// Relative ridge added to a covariance that fails to factorize.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub cov_type: CovType,
    /// Stop when `|ℓ_t − ℓ_{t−1}| / |ℓ_t|` falls below this.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { cov_type: CovType::Full, epsilon: 1e-4, max_iter: 500 }
    }
}

/// Where EM starts: a hard partition (first step is an M-step) or a model.
#[derive(Debug, Clone)]
pub enum EmInit<'a> {
    Partition(&'a Partition),
    Model(GmmModel),
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: GmmModel,
    pub log_likelihood: f64,
    /// Log-likelihood after each E-step, in order.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub fn em_fit(data: &Dataset, k: usize, init: EmInit<'_>, opts: &EmOptions) -> Result<EmFit> {
    if k == 0 {
        return Err(Error::InvalidInput("EM needs k >= 1".into()));
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::Domain("EM tolerance must be positive"));
    }
    let mut model = match init {
        EmInit::Partition(part) => {
            if part.k() != k || part.n() != data.n() {
                return Err(Error::Dimension { expected: k, found: part.k() });
            }
            m_step(data, &Responsibilities::from_partition(part), opts.cov_type)?
        }
        EmInit::Model(m) => {
            if m.k() != k {
                return Err(Error::Dimension { expected: k, found: m.k() });
            }
            m
        }
    };
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let (resp, ll) = e_step_with_log_likelihood(&model, data)?;
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() / ll.abs().max(f64::MIN_POSITIVE) < opts.epsilon {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if trace.len() > opts.max_iter {
            break;
        }
        model = m_step(data, &resp, opts.cov_type)?;
    }
    let log_likelihood = *trace.last().expect("at least one E-step");
    Ok(EmFit { model, log_likelihood, trace, converged })
}

/// Weighted maximum-likelihood update under `cov_type`.
///
/// A covariance that fails to factorize gets one ridge of
/// `COVARIANCE_RIDGE · trace/p` on its diagonal; if it still fails, the
/// component is reported as degenerate.
pub fn m_step(data: &Dataset, resp: &Responsibilities, cov_type: CovType) -> Result<GmmModel> {
    let n = data.n();
    let p = data.p();
    let k = resp.k();
    let mass = resp.column_sums();
    let floor = 10.0 * f64::EPSILON;
    if let Some(j) = mass.iter().position(|&m| !(m > floor)) {
        return Err(Error::DegenerateComponent(j));
    }

    let mut means = vec![vec![0.0; p]; k];
    for i in 0..n {
        let x = data.sample(i);
        for (j, &r) in resp.row(i).iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for (m, xv) in means[j].iter_mut().zip(x) {
                *m += r * xv;
            }
        }
    }
    for (m, &w) in means.iter_mut().zip(&mass) {
        m.iter_mut().for_each(|v| *v /= w);
    }

    let mut scatter = vec![Matrix::zeros(p, p); k];
    let mut d = vec![0.0; p];
    for i in 0..n {
        let x = data.sample(i);
        for (j, &r) in resp.row(i).iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for ((dv, xv), mv) in d.iter_mut().zip(x).zip(&means[j]) {
                *dv = xv - mv;
            }
            let s = scatter[j].as_mut_slice();
            for a in 0..p {
                let ra = r * d[a];
                for b in a..p {
                    s[a * p + b] += ra * d[b];
                }
            }
        }
    }
    for s in scatter.iter_mut() {
        for a in 0..p {
            for b in 0..a {
                s[(a, b)] = s[(b, a)];
            }
        }
    }

    let covariances: Vec<Matrix> = match cov_type {
        CovType::Full => scatter
            .iter()
            .zip(&mass)
            .enumerate()
            .map(|(j, (s, &w))| repair(s.scaled(1.0 / w), j))
            .collect::<Result<_>>()?,
        CovType::SphericalPerCluster => scatter
            .iter()
            .zip(&mass)
            .enumerate()
            .map(|(j, (s, &w))| repair(Matrix::scaled_identity(p, s.trace() / (w * p as f64)), j))
            .collect::<Result<_>>()?,
        CovType::SphericalShared => {
            let total: f64 = scatter.iter().map(Matrix::trace).sum();
            let c = repair(Matrix::scaled_identity(p, total / (n as f64 * p as f64)), 0)?;
            vec![c; k]
        }
        CovType::FullShared => {
            let mut pooled = Matrix::zeros(p, p);
            for s in &scatter {
                pooled.add_assign_scaled(s, 1.0 / n as f64);
            }
            let c = repair(pooled, 0)?;
            vec![c; k]
        }
    };
    let total: f64 = mass.iter().sum();
    let weights = mass.iter().map(|m| m / total).collect();
    GmmModel::new(weights, means, covariances).map_err(|e| match e {
        Error::SingularCovariance => Error::DegenerateComponent(0),
        other => other,
    })
}

/// Returns `cov` unchanged if it factorizes, otherwise tries one ridge.
pub(crate) fn repair(mut cov: Matrix, component: usize) -> Result<Matrix> {
    if cov.as_slice().iter().all(|v| v.is_finite()) && Cholesky::new(&cov).is_some() {
        return Ok(cov);
    }
    let p = cov.rows();
    let scale = cov.trace() / p as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateComponent(component));
    }
    cov.add_to_diagonal(COVARIANCE_RIDGE * scale);
    if Cholesky::new(&cov).is_some() {
        Ok(cov)
    } else {
        Err(Error::DegenerateComponent(component))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::sample_model;
    use crate::rng::Stream;
    use alloc::vec;

    #[test]
    fn single_component_is_closed_form() {
        let model = GmmModel::new(vec![1.0], vec![vec![1.0, -2.0]], vec![Matrix::from_rows(&[[2.0, 0.4], [0.4, 0.5]])])
            .unwrap();
        let data = sample_model(&model, 500, Stream::new(1)).unwrap();
        let fit = em_fit(&data, 1, EmInit::Partition(&Partition::single(500)), &EmOptions::default()).unwrap();
        let mean = data.mean();
        let cov = data.covariance();
        for j in 0..2 {
            assert!((fit.model.means()[0][j] - mean[j]).abs() < 1e-12);
        }
        assert!(fit.model.covariances()[0].max_abs_diff(&cov) < 1e-12);
    }

    #[test]
    fn two_separated_gaussians() {
        let truth = GmmModel::new(
            vec![0.5, 0.5],
            vec![vec![-10.0], vec![10.0]],
            vec![Matrix::identity(1), Matrix::identity(1)],
        )
        .unwrap();
        let data = sample_model(&truth, 2000, Stream::new(2)).unwrap();
        let init =
            GmmModel::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![Matrix::identity(1), Matrix::identity(1)])
                .unwrap();
        let fit = em_fit(&data, 2, EmInit::Model(init), &EmOptions::default()).unwrap();
        let mut m: Vec<f64> = fit.model.means().iter().map(|v| v[0]).collect();
        m.sort_by(f64::total_cmp);
        assert!((m[0] + 10.0).abs() < 0.15 && (m[1] - 10.0).abs() < 0.15, "{m:?}");
    }

    #[test]
    fn collapsed_component_is_named() {
        let data = Dataset::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let mut r = Matrix::zeros(3, 2);
        for i in 0..3 {
            r[(i, 0)] = 1.0;
        }
        let resp = Responsibilities::from_matrix(r);
        assert_eq!(m_step(&data, &resp, CovType::Full), Err(Error::DegenerateComponent(1)));
    }

    #[test]
    fn ridge_repairs_rank_deficient_cluster() {
        // Two identical points plus one other give a rank-one 2-D scatter.
        let data = Dataset::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let resp = Responsibilities::from_partition(&Partition::single(3));
        let m = m_step(&data, &resp, CovType::Full).unwrap();
        assert!(Cholesky::new(&m.covariances()[0]).is_some());
        let constant = Dataset::from_rows(&[[1.0], [1.0]]).unwrap();
        let resp = Responsibilities::from_partition(&Partition::single(2));
        assert_eq!(m_step(&constant, &resp, CovType::Full), Err(Error::DegenerateComponent(0)));
    }
}
