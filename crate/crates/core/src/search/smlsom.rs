//! Self-organizing mixture learning with MDL-driven merging.
//!
//! Each outer round runs a SOM learning phase over the nodes, hard-assigns
//! the data, refits every node by maximum likelihood, and then tries to merge
//! each node into its nearest neighbor in KL divergence. The single best merge
//! is kept if it shortens the description length.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::seq::SliceRandom;

use super::components::{initial_components, params_per_component, spherical, to_model, weighted_fit, Component};
use super::kmeans::two_means;
use super::{Method, Move, SearchConfig, SearchResult, SplitInit};
use crate::gmm::em::repair;
use crate::gmm::{e_step, Dataset};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::Stream;
use crate::{Error, Result};

const ETA_START: f64 = 0.05;
const ETA_END: f64 = 0.01;
const KL_REFRESH: usize = 50;
const FINALIZE_ROUNDS: usize = 20;

/// `KL(N(m0, s0) ‖ N(m1, s1))` in nats.
pub fn gaussian_kl(m0: &[f64], s0: &Matrix, m1: &[f64], s1: &Matrix) -> Result<f64> {
    let p = m0.len();
    if m1.len() != p || s0.rows() != p || s1.rows() != p {
        return Err(Error::Dimension { expected: p, found: m1.len() });
    }
    let c0 = Cholesky::new(s0).ok_or(Error::SingularCovariance)?;
    let c1 = Cholesky::new(s1).ok_or(Error::SingularCovariance)?;
    let inv1 = c1.inverse();
    let tr: f64 = (0..p).map(|a| (0..p).map(|b| inv1[(a, b)] * s0[(b, a)]).sum::<f64>()).sum();
    let d: Vec<f64> = m1.iter().zip(m0).map(|(a, b)| a - b).collect();
    Ok(0.5 * (tr + c1.mahalanobis_sq(&d) - p as f64 + c1.log_det() - c0.log_det()))
}

fn kl_fast(a: &Component, b: &Component, inv_b: &Matrix) -> f64 {
    let p = a.mean.len();
    let tr: f64 = (0..p).map(|i| (0..p).map(|j| inv_b[(i, j)] * a.cov[(j, i)]).sum::<f64>()).sum();
    let d: Vec<f64> = b.mean.iter().zip(&a.mean).map(|(x, y)| x - y).collect();
    let q: f64 = (0..p).map(|i| d[i] * (0..p).map(|j| inv_b[(i, j)] * d[j]).sum::<f64>()).sum();
    0.5 * (tr + q - p as f64 + b.log_det() - a.log_det())
}

/// Directed KL between every pair of nodes: `out[a][b] = KL(a ‖ b)`.
fn kl_matrix(nodes: &[Component]) -> Vec<Vec<f64>> {
    let inv: Vec<Matrix> = nodes.iter().map(Component::inverse).collect();
    (0..nodes.len())
        .map(|a| (0..nodes.len()).map(|b| if a == b { 0.0 } else { kl_fast(&nodes[a], &nodes[b], &inv[b]) }).collect())
        .collect()
}

struct Node {
    comp: Component,
    second: Matrix,
    weight: f64,
}

impl Node {
    fn new(comp: Component, weight: f64) -> Node {
        let mut second = comp.cov.clone();
        let p = comp.mean.len();
        for a in 0..p {
            for b in 0..p {
                second[(a, b)] += comp.mean[a] * comp.mean[b];
            }
        }
        Node { comp, second, weight }
    }

    fn update(&mut self, x: &[f64], rate: f64, sph: bool) {
        let p = x.len();
        let mut mean = self.comp.mean.clone();
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += rate * (xi - *m);
        }
        let mut second = self.second.clone();
        for a in 0..p {
            for b in 0..p {
                second[(a, b)] += rate * (x[a] * x[b] - second[(a, b)]);
            }
        }
        let mut cov = second.clone();
        for a in 0..p {
            for b in 0..p {
                cov[(a, b)] -= mean[a] * mean[b];
            }
        }
        cov.symmetrize();
        if sph {
            cov = Matrix::scaled_identity(p, cov.trace() / p as f64);
        }
        if let Some(c) = repair(cov, 0).ok().and_then(|cov| Component::new(mean, cov)) {
            self.comp = c;
            self.second = second;
        }
    }
}

fn learn(data: &Dataset, nodes: &mut [Node], cfg: &SearchConfig, sph: bool, rng: &mut impl rand::Rng) {
    let n = data.n();
    let k = nodes.len();
    let tau = cfg.tau_max.unwrap_or(n).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut scratch = vec![0.0; data.p()];
    let mut kl = Vec::new();
    for t in 0..tau {
        if t % n == 0 {
            order.shuffle(rng);
        }
        if t % KL_REFRESH == 0 {
            let comps: Vec<Component> = nodes.iter().map(|nd| nd.comp.clone()).collect();
            kl = kl_matrix(&comps);
        }
        let x = data.sample(order[t % n]);
        let eta = ETA_START - (ETA_START - ETA_END) * t as f64 / tau as f64;
        let winner = (0..k)
            .map(|j| (j, nodes[j].weight.ln() + nodes[j].comp.log_density(x, &mut scratch)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .expect("at least one node");
        for j in 0..k {
            let sym = kl[winner][j] + kl[j][winner];
            if j == winner || sym <= cfg.beta {
                nodes[j].update(x, eta * (-sym / cfg.beta).exp(), sph);
            }
            let hit = if j == winner { 1.0 } else { 0.0 };
            nodes[j].weight += eta * (hit - nodes[j].weight);
        }
    }
}

/// Hard assignment followed by a maximum-likelihood refit. Nodes with at most
/// `p` members are dropped and their samples reassigned; if that leaves fewer
/// than `k_min` nodes, the largest clusters are split by 2-means instead.
fn finalize(
    data: &Dataset,
    mut comps: Vec<Component>,
    mut weights: Vec<f64>,
    k_min: usize,
    sph: bool,
    rng: &mut impl rand::Rng,
) -> (Vec<Component>, Vec<f64>) {
    let n = data.n();
    let p = data.p();
    let mut scratch = vec![0.0; p];
    for _ in 0..FINALIZE_ROUNDS {
        let k = comps.len();
        let labels: Vec<usize> = (0..n)
            .map(|i| {
                let x = data.sample(i);
                (0..k)
                    .map(|j| (j, weights[j].max(f64::MIN_POSITIVE).ln() + comps[j].log_density(x, &mut scratch)))
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(j, _)| j)
                    .expect("at least one node")
            })
            .collect();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        labels.iter().enumerate().for_each(|(i, &l)| groups[l].push(i));
        let before = groups.len();
        let mut groups: Vec<Vec<usize>> = groups.into_iter().filter(|g| g.len() > p).collect();
        let mut stable = groups.len() == before;
        while groups.len() < k_min.min(n / (p + 1)).max(1) {
            let largest = (0..groups.len()).max_by_key(|&g| (groups[g].len(), usize::MAX - g));
            let Some(g) = largest else {
                groups.push((0..n).collect());
                continue;
            };
            let sub = data.subset(&groups[g]);
            let Some((part, _)) = two_means(&sub, SplitInit::Reflection, rng) else { break };
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (&i, &l) in groups[g].iter().zip(part.labels()) {
                if l == 0 {
                    a.push(i)
                } else {
                    b.push(i)
                }
            }
            if a.len() <= p || b.len() <= p {
                break;
            }
            groups[g] = a;
            groups.push(b);
            stable = false;
        }
        let mut fitted = Vec::with_capacity(groups.len());
        let mut sizes = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut w = vec![0.0; n];
            g.iter().for_each(|&i| w[i] = 1.0);
            if let Some(c) = weighted_fit(data, &w, sph) {
                fitted.push(c);
                sizes.push(g.len());
            } else {
                stable = false;
            }
        }
        if fitted.is_empty() {
            return (comps, weights);
        }
        let total: usize = sizes.iter().sum();
        weights = sizes.iter().map(|&s| s as f64 / total as f64).collect();
        comps = fitted;
        if stable {
            break;
        }
    }
    (comps, weights)
}

fn log_sum_exp_rows(cols: &[&[f64]], log_w: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|i| {
            let m = cols.iter().zip(log_w).map(|(c, w)| c[i] + w).fold(f64::NEG_INFINITY, f64::max);
            m + cols.iter().zip(log_w).map(|(c, w)| (c[i] + w - m).exp()).sum::<f64>().ln()
        })
        .sum()
}

fn description_length(ll: f64, k: usize, n: usize, per: usize) -> f64 {
    let m = (k * per + k - 1) as f64;
    -ll + 0.5 * m * (n as f64).log2()
}

/// Moment-matched union of two weighted components.
fn merge_pair(a: &Component, wa: f64, b: &Component, wb: f64, sph: bool) -> Option<Component> {
    let p = a.mean.len();
    let w = wa + wb;
    let mean: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| (wa * x + wb * y) / w).collect();
    let mut cov = Matrix::zeros(p, p);
    for r in 0..p {
        for c in 0..p {
            let sa = a.cov[(r, c)] + a.mean[r] * a.mean[c];
            let sb = b.cov[(r, c)] + b.mean[r] * b.mean[c];
            cov[(r, c)] = (wa * sa + wb * sb) / w - mean[r] * mean[c];
        }
    }
    cov.symmetrize();
    if sph {
        cov = Matrix::scaled_identity(p, cov.trace() / p as f64);
    }
    Component::new(mean, repair(cov, 0).ok()?)
}

pub(super) fn smlsom(data: &Dataset, cfg: &SearchConfig, stream: Stream) -> Result<SearchResult> {
    let n = data.n();
    let sph = spherical(cfg.cov_type);
    let per = params_per_component(data.p(), sph);
    let mut rng = stream.rng();
    let mut comps = initial_components(data, cfg.k_max.min(n), &mut rng);
    let mut weights = vec![1.0 / comps.len() as f64; comps.len()];
    let mut trace = Vec::new();
    let mut moves = Vec::new();
    loop {
        let mut nodes: Vec<Node> = comps.into_iter().zip(&weights).map(|(c, &w)| Node::new(c, w)).collect();
        learn(data, &mut nodes, cfg, sph, &mut rng);
        let w: Vec<f64> = nodes.iter().map(|nd| nd.weight).collect();
        let (c, w) = finalize(data, nodes.into_iter().map(|nd| nd.comp).collect(), w, cfg.k_min, sph, &mut rng);
        comps = c;
        weights = w;
        let k = comps.len();
        let cols: Vec<Vec<f64>> = comps.iter().map(|c| c.column(data)).collect();
        let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let current = description_length(log_sum_exp_rows(&refs, &log_w, n), k, n, per);
        trace.push((k, current));
        if k <= cfg.k_min {
            break;
        }
        let kl = kl_matrix(&comps);
        let mut best: Option<(f64, usize, usize, Component)> = None;
        for c in 0..k {
            let j = (0..k).filter(|&j| j != c).min_by(|&a, &b| kl[c][a].total_cmp(&kl[c][b])).expect("k >= 2");
            let Some(merged) = merge_pair(&comps[c], weights[c], &comps[j], weights[j], sph) else { continue };
            let col = merged.column(data);
            let mut r: Vec<&[f64]> = Vec::with_capacity(k - 1);
            let mut lw = Vec::with_capacity(k - 1);
            for m in (0..k).filter(|&m| m != c && m != j) {
                r.push(&cols[m]);
                lw.push(log_w[m]);
            }
            r.push(&col);
            lw.push((weights[c] + weights[j]).ln());
            let score = description_length(log_sum_exp_rows(&r, &lw, n), k - 1, n, per);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, c, j, merged));
            }
        }
        match best {
            Some((score, c, j, merged)) if score < current => {
                moves.push(Move { k_before: k, k_after: k - 1, score_before: current, score_after: score });
                let wm = weights[c] + weights[j];
                let (lo, hi) = if c < j { (c, j) } else { (j, c) };
                comps.remove(hi);
                weights.remove(hi);
                comps[lo] = merged;
                weights[lo] = wm;
            }
            _ => break,
        }
    }
    let criterion = trace.last().map(|t| t.1).unwrap_or(f64::INFINITY);
    let model = to_model(&weights, &comps).ok_or(Error::SingularCovariance)?;
    let part = e_step(&model, data)?.map_partition();
    let mut res = SearchResult::new(Method::Smlsom, part, Some(model), criterion);
    res.trace = trace;
    res.moves = moves;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_univariate_closed_form() {
        let (m0, v0, m1, v1) = (0.3, 2.0, -1.0, 0.5);
        let expect = 0.5 * (v0 / v1 + (m1 - m0) * (m1 - m0) / v1 - 1.0 + (v1 / v0).ln());
        let got = gaussian_kl(&[m0], &Matrix::from_rows(&[[v0]]), &[m1], &Matrix::from_rows(&[[v1]])).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        let same = gaussian_kl(&[1.0, 2.0], &Matrix::identity(2), &[1.0, 2.0], &Matrix::identity(2)).unwrap();
        assert_abs_diff_eq!(same, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn merge_preserves_moments() {
        let a = Component::new(vec![0.0], Matrix::from_rows(&[[1.0]])).unwrap();
        let b = Component::new(vec![2.0], Matrix::from_rows(&[[1.0]])).unwrap();
        let m = merge_pair(&a, 0.5, &b, 0.5, false).unwrap();
        assert_abs_diff_eq!(m.mean[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.cov[(0, 0)], 2.0, epsilon = 1e-14);
    }
}
