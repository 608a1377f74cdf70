use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::kmeans::{kmeans, reflection_init, KMEANS_MAX_ITER};
use super::{initial_partition, Method, Move, SearchConfig, SearchResult};
use crate::gmm::{bic_xmeans, Dataset};
use crate::linalg::{sq_dist, Matrix};
use crate::rng::Stream;
use crate::stats::{DipNull, DipWorkspace};
use crate::Result;

/// Clusters smaller than this are never tested.
const MIN_TESTED: usize = 5;

/// Bootstrap nulls keyed by sample size, drawn lazily from per-size streams.
struct NullCache {
    stream: Stream,
    b: usize,
    nulls: BTreeMap<usize, DipNull>,
}

impl NullCache {
    fn get(&mut self, m: usize) -> Result<&DipNull> {
        if !self.nulls.contains_key(&m) {
            let null = DipNull::simulate(m, self.b, self.stream.child(m as u64))?;
            self.nulls.insert(m, null);
        }
        Ok(&self.nulls[&m])
    }
}

/// Fraction of members whose distance profile rejects unimodality.
fn split_viewer_ratio(data: &Dataset, members: &[usize], alpha: f64, cache: &mut NullCache) -> Result<f64> {
    let m = members.len();
    let null = cache.get(m - 1)?;
    let mut ws = DipWorkspace::new(m - 1);
    let mut d = vec![0.0; m - 1];
    let mut viewers = 0usize;
    for &i in members {
        let x = data.sample(i);
        let mut t = 0;
        for &j in members {
            if j != i {
                d[t] = sq_dist(x, data.sample(j)).sqrt();
                t += 1;
            }
        }
        d.sort_unstable_by(f64::total_cmp);
        if null.p_value(ws.dip(&d)) <= alpha {
            viewers += 1;
        }
    }
    Ok(viewers as f64 / m as f64)
}

pub(super) fn dipmeans(data: &Dataset, cfg: &SearchConfig, stream: Stream) -> Result<SearchResult> {
    let mut rng = stream.child_named("split").rng();
    let mut cache = NullCache { stream: stream.child_named("dip-null"), b: cfg.b.max(100), nulls: BTreeMap::new() };
    let k_max = cfg.k_max.min(data.n());
    let (_, mut centers) = initial_partition(data, cfg.k_min, &mut rng);
    let mut trace = Vec::new();
    let mut moves = Vec::new();
    loop {
        let (part, fitted) = kmeans(data, &centers, KMEANS_MAX_ITER);
        let k = part.k();
        trace.push((k, bic_xmeans(&part, data).unwrap_or(f64::INFINITY)));
        let members = part.members();
        let mut best: Option<(usize, f64)> = None;
        if k < k_max {
            for (j, s) in members.iter().enumerate() {
                if s.len() < MIN_TESTED {
                    continue;
                }
                let ratio = split_viewer_ratio(data, s, cfg.alpha, &mut cache)?;
                if ratio > cfg.v_thd && best.is_none_or(|(_, r)| ratio > r) {
                    best = Some((j, ratio));
                }
            }
        }
        let split = best.and_then(|(j, ratio)| {
            let subset = data.subset(&members[j]);
            let mu = fitted.row(j);
            let (a, b) = reflection_init(&subset, mu, &mut rng);
            let (halves, sub) = kmeans(&subset, &Matrix::from_rows(&[a, b]), KMEANS_MAX_ITER);
            (halves.k() == 2).then_some((j, ratio, sub))
        });
        let Some((j, ratio, sub)) = split else {
            let criterion = bic_xmeans(&part, data)?;
            let mut res = SearchResult::new(Method::DipMeans, part, None, criterion);
            res.trace = trace;
            res.moves = moves;
            return Ok(res);
        };
        moves.push(Move { k_before: k, k_after: k + 1, score_before: ratio, score_after: cfg.v_thd });
        let mut next: Vec<Vec<f64>> = (0..k).filter(|&i| i != j).map(|i| fitted.row(i).to_vec()).collect();
        next.insert(j, sub.row(0).to_vec());
        next.insert(j + 1, sub.row(1).to_vec());
        centers = Matrix::from_rows(&next);
    }
}
