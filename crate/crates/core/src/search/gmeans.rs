use alloc::vec::Vec;

use super::kmeans::{kmeans, two_means, KMEANS_MAX_ITER};
use super::{initial_partition, Method, Move, SearchConfig, SearchResult};
use crate::gmm::{bic_xmeans, Dataset};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::Stream;
use crate::stats::{ad_critical_value, ad_statistic, SortedSample};
use crate::{Error, Result};

/// Clusters smaller than this are never tested.
const MIN_TESTED: usize = 8;

pub(super) fn gmeans(data: &Dataset, cfg: &SearchConfig) -> Result<SearchResult> {
    let critical = ad_critical_value(cfg.alpha)
        .ok_or(Error::Domain("no Anderson-Darling critical value tabulated for this significance level"))?;
    // Nothing here draws random numbers unless Kmin > 1; keep that seed-free too.
    let mut rng = Stream::new(0).rng();
    let k_max = cfg.k_max.min(data.n());
    let (_, mut centers) = initial_partition(data, cfg.k_min, &mut rng);
    let mut trace = Vec::new();
    let mut moves = Vec::new();
    loop {
        let (part, fitted) = kmeans(data, &centers, KMEANS_MAX_ITER);
        let k = part.k();
        trace.push((k, bic_xmeans(&part, data).unwrap_or(f64::INFINITY)));
        let mut next: Vec<Vec<f64>> = Vec::new();
        let mut k_now = k;
        for (j, members) in part.members().iter().enumerate() {
            let keep = fitted.row(j).to_vec();
            if k_now >= k_max || members.len() < MIN_TESTED {
                next.push(keep);
                continue;
            }
            let subset = data.subset(members);
            let Some((_, sub_centers)) = two_means(&subset, cfg.split_init, &mut rng) else {
                next.push(keep);
                continue;
            };
            let v: Vec<f64> = sub_centers.row(0).iter().zip(sub_centers.row(1)).map(|(a, b)| a - b).collect();
            let len = norm(&v);
            if !(len > 0.0) {
                next.push(keep);
                continue;
            }
            let projected: Vec<f64> = (0..subset.n()).map(|i| dot(subset.sample(i), &v) / len).collect();
            let Ok(a2) = SortedSample::from_unsorted(projected).and_then(|s| ad_statistic(&s)) else {
                next.push(keep);
                continue;
            };
            if a2 > critical {
                moves.push(Move { k_before: k_now, k_after: k_now + 1, score_before: a2, score_after: critical });
                k_now += 1;
                next.push(sub_centers.row(0).to_vec());
                next.push(sub_centers.row(1).to_vec());
            } else {
                next.push(keep);
            }
        }
        if k_now == k {
            let criterion = bic_xmeans(&part, data).unwrap_or(f64::INFINITY);
            let mut res = SearchResult::new(Method::GMeans, part, None, criterion);
            res.trace = trace;
            res.moves = moves;
            return Ok(res);
        }
        centers = Matrix::from_rows(&next);
    }
}
