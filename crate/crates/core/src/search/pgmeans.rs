use alloc::boxed::Box;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{initial_partition, Method, Move, SearchConfig, SearchResult};
use crate::gmm::{e_step, em_fit, standard_bic, Dataset, EmFit, EmInit, EmOptions, GmmModel, Partition};
use crate::linalg::{dot, Matrix};
use crate::rng::Stream;
use crate::stats::{ks_critical_value, ks_statistic, normal_cdf, SortedSample};
use crate::{Error, Result};

/// Largest KS statistic over `projections` between the projected data and model.
fn worst_projection(data: &Dataset, model: &GmmModel, projections: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for proj in projections {
        let xs: Vec<f64> = (0..data.n()).map(|i| dot(data.sample(i), proj)).collect();
        let sample = SortedSample::from_unsorted(xs)?;
        let comps: Vec<(f64, f64, f64)> = (0..model.k())
            .map(|k| {
                let m = dot(&model.means()[k], proj);
                let v = dot(proj, &model.covariances()[k].mul_vec(proj));
                (model.weights()[k], m, v.max(f64::MIN_POSITIVE).sqrt())
            })
            .collect();
        let cdf = |x: f64| comps.iter().map(|&(w, m, s)| w * normal_cdf((x - m) / s)).sum::<f64>();
        worst = worst.max(ks_statistic(&sample, cdf));
    }
    Ok(worst)
}

fn fit_from_partition(data: &Dataset, part: &Partition, opts: &EmOptions) -> Result<EmFit> {
    em_fit(data, part.k(), EmInit::Partition(part), opts)
}

pub(super) fn pgmeans(data: &Dataset, cfg: &SearchConfig, stream: Stream) -> Result<SearchResult> {
    let mut rng = stream.rng();
    let n = data.n();
    let p = data.p();
    let k_max = cfg.k_max.min(n);
    let opts = EmOptions { cov_type: cfg.cov_type, epsilon: cfg.epsilon, max_iter: cfg.max_em_iter };
    let threshold = ks_critical_value(cfg.alpha, n)?;
    let (start, _) = initial_partition(data, cfg.k_min, &mut rng);
    let mut fit = fit_from_partition(data, &start, &opts)?;
    let mut trace = Vec::new();
    let mut moves = Vec::new();
    loop {
        let k = fit.model.k();
        trace.push((k, standard_bic(&fit.model, data, cfg.cov_type)?));
        let sd = (1.0 / p as f64).sqrt();
        let projections: Vec<Vec<f64>> =
            (0..cfg.h).map(|_| (0..p).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let worst = worst_projection(data, &fit.model, &projections)?;
        if worst <= threshold || k >= k_max {
            break;
        }
        let model = &fit.model;
        let mut avg = Matrix::zeros(p, p);
        for c in model.covariances() {
            avg.add_assign_scaled(c, 1.0 / k as f64);
        }
        let mut best: Option<EmFit> = None;
        for _ in 0..cfg.em_restarts {
            let x = data.sample(rng.random_range(0..n)).to_vec();
            let mut masses = model.weights().to_vec();
            masses.push(1.0 / k as f64);
            let mut means = model.means().to_vec();
            means.push(x);
            let mut covs = model.covariances().to_vec();
            covs.push(avg.clone());
            let Ok(init) = GmmModel::from_masses(&masses, means, covs) else { continue };
            if let Ok(f) = em_fit(data, k + 1, EmInit::Model(init), &opts) {
                if best.as_ref().is_none_or(|b| f.log_likelihood > b.log_likelihood) {
                    best = Some(f);
                }
            }
        }
        let Some(next) = best else {
            return Err(Error::PgMeansFailed { k: k + 1, last_good: Box::new(fit.model) });
        };
        moves.push(Move { k_before: k, k_after: k + 1, score_before: worst, score_after: threshold });
        fit = next;
    }
    let criterion = standard_bic(&fit.model, data, cfg.cov_type)?;
    let part = e_step(&fit.model, data)?.map_partition();
    let mut res = SearchResult::new(Method::PgMeans, part, Some(fit.model), criterion);
    res.trace = trace;
    res.moves = moves;
    Ok(res)
}
