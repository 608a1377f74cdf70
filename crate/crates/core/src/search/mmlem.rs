//! Component-wise EM under the minimum message length criterion.
//!
//! Starts from `Kmax` components; weights are updated as
//! `π_m ∝ max(0, Σ_i w_im − N/2)` so unsupported components are annihilated
//! during EM. After convergence the weakest component is removed and EM
//! resumes, down to `Kmin`. The model with the shortest message wins.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::components::{initial_components, params_per_component, spherical, to_model, weighted_fit, Component};
use super::{Method, Move, SearchConfig, SearchResult};
use crate::gmm::{e_step, Dataset};
use crate::rng::Stream;
use crate::{Error, Result};

struct State {
    comps: Vec<Component>,
    weights: Vec<f64>,
    alive: Vec<bool>,
    logf: Vec<Vec<f64>>,
    lse: Vec<f64>,
}

impl State {
    fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    fn refresh_lse(&mut self) {
        let live: Vec<usize> = (0..self.comps.len()).filter(|&m| self.alive[m]).collect();
        for (i, out) in self.lse.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for &m in &live {
                best = best.max(self.weights[m].ln() + self.logf[m][i]);
            }
            let s: f64 = live.iter().map(|&m| (self.weights[m].ln() + self.logf[m][i] - best).exp()).sum();
            *out = best + s.ln();
        }
    }

    fn kill(&mut self, m: usize) {
        self.alive[m] = false;
        self.weights[m] = 0.0;
        self.normalize();
        self.refresh_lse();
    }

    fn message_length(&self, n: usize, big_n: usize) -> f64 {
        let nf = n as f64;
        let half = 0.5 * big_n as f64;
        let k = self.alive_count() as f64;
        let ll: f64 = self.lse.iter().sum();
        let wt: f64 = self.weights.iter().filter(|w| **w > 0.0).map(|w| (nf * w / 12.0).ln()).sum();
        half * wt + 0.5 * k * (nf / 12.0).ln() + 0.5 * k * (big_n as f64 + 1.0) - ll
    }

    /// One pass over the live components; never annihilates below `k_min`.
    fn sweep(&mut self, data: &Dataset, big_n: usize, k_min: usize, sph: bool) {
        let n = data.n();
        for m in 0..self.comps.len() {
            if !self.alive[m] {
                continue;
            }
            let lw = self.weights[m].ln();
            let w: Vec<f64> = (0..n).map(|i| (lw + self.logf[m][i] - self.lse[i]).exp()).collect();
            let mass: f64 = w.iter().sum();
            let last = self.alive_count() <= k_min.max(1);
            let pi = (mass - 0.5 * big_n as f64).max(0.0) / n as f64;
            if pi == 0.0 && !last {
                self.kill(m);
                continue;
            }
            match weighted_fit(data, &w, sph) {
                Some(c) => {
                    self.logf[m] = c.column(data);
                    self.comps[m] = c;
                }
                None if !last => {
                    self.kill(m);
                    continue;
                }
                None => {}
            }
            if pi > 0.0 {
                self.weights[m] = pi;
                self.normalize();
            }
            self.refresh_lse();
        }
    }
}

pub(super) fn mmlem(data: &Dataset, cfg: &SearchConfig, stream: Stream) -> Result<SearchResult> {
    let n = data.n();
    let p = data.p();
    let sph = spherical(cfg.cov_type);
    let big_n = params_per_component(p, sph);
    let k0 = cfg.k_max.min(n);
    let mut rng = stream.rng();
    let comps = initial_components(data, k0, &mut rng);
    let k0 = comps.len();
    let logf = comps.iter().map(|c| c.column(data)).collect();
    let mut st = State {
        comps,
        weights: alloc::vec![1.0 / k0 as f64; k0],
        alive: alloc::vec![true; k0],
        logf,
        lse: alloc::vec![0.0; n],
    };
    st.refresh_lse();

    let mut trace = Vec::new();
    let mut moves = Vec::new();
    let mut pending: Option<Move> = None;
    let mut best: Option<(f64, Vec<f64>, Vec<Component>)> = None;
    loop {
        let mut length = st.message_length(n, big_n);
        for _ in 0..cfg.max_em_iter {
            st.sweep(data, big_n, cfg.k_min, sph);
            let next = st.message_length(n, big_n);
            let done = (next - length).abs() <= cfg.epsilon * length.abs();
            length = next;
            if done {
                break;
            }
        }
        let k_nz = st.alive_count();
        trace.push((k_nz, length));
        if let Some(mut mv) = pending.take() {
            mv.score_after = length;
            moves.push(mv);
        }
        if length.is_finite() && best.as_ref().is_none_or(|b| length < b.0) {
            best = Some((length, st.weights.clone(), st.comps.clone()));
        }
        if k_nz <= cfg.k_min {
            break;
        }
        let weakest = (0..st.comps.len())
            .filter(|&m| st.alive[m])
            .min_by(|&a, &b| st.weights[a].total_cmp(&st.weights[b]))
            .expect("a live component");
        st.kill(weakest);
        pending = Some(Move { k_before: k_nz, k_after: k_nz - 1, score_before: length, score_after: f64::NAN });
    }

    let (criterion, weights, comps) = best.ok_or(Error::DegenerateComponent(0))?;
    let model = to_model(&weights, &comps).ok_or(Error::SingularCovariance)?;
    let part = e_step(&model, data)?.map_partition();
    let mut res = SearchResult::new(Method::MmlEm, part, Some(model), criterion);
    res.trace = trace;
    res.moves = moves;
    Ok(res)
}
