use alloc::vec::Vec;

use super::kmeans::{kmeans, two_means, KMEANS_MAX_ITER};
use super::{initial_partition, Method, Move, SearchConfig, SearchResult};
use crate::gmm::{bic_xmeans, Dataset, Partition};
use crate::linalg::Matrix;
use crate::rng::Stream;
use crate::Result;

pub(super) fn xmeans(data: &Dataset, cfg: &SearchConfig, stream: Stream) -> Result<SearchResult> {
    let mut rng = stream.rng();
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
            if k_now >= k_max || members.len() < 3 {
                next.push(keep);
                continue;
            }
            let subset = data.subset(members);
            let Some((halves, sub_centers)) = two_means(&subset, cfg.split_init, &mut rng) else {
                next.push(keep);
                continue;
            };
            let (Ok(bic1), Ok(bic2)) =
                (bic_xmeans(&Partition::single(subset.n()), &subset), bic_xmeans(&halves, &subset))
            else {
                next.push(keep);
                continue;
            };
            if bic2 < bic1 {
                moves.push(Move { k_before: k_now, k_after: k_now + 1, score_before: bic1, score_after: bic2 });
                k_now += 1;
                next.push(sub_centers.row(0).to_vec());
                next.push(sub_centers.row(1).to_vec());
            } else {
                next.push(keep);
            }
        }
        if k_now == k {
            let criterion = bic_xmeans(&part, data)?;
            let mut res = SearchResult::new(Method::XMeans, part, None, criterion);
            res.trace = trace;
            res.moves = moves;
            return Ok(res);
        }
        centers = Matrix::from_rows(&next);
    }
}
