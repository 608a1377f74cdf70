//! Benchmark mixtures with a prescribed average pairwise overlap.
//!
//! `ω_{l|k}` is the probability that a draw from component `k` scores higher
//! under component `l`. Calibration scales every covariance by one factor `c`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gmm::{sample_model, Dataset, GmmModel};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::rng::Stream;
use crate::{Error, Result};

/// The four generating covariance structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CovStructure {
    HomSpherical,
    HomFull,
    HetSpherical,
    HetFull,
}

impl CovStructure {
    pub const ALL: [CovStructure; 4] =
        [CovStructure::HomSpherical, CovStructure::HomFull, CovStructure::HetSpherical, CovStructure::HetFull];

    /// Table position, 1 through 4.
    pub fn index(self) -> usize {
        match self {
            CovStructure::HomSpherical => 1,
            CovStructure::HomFull => 2,
            CovStructure::HetSpherical => 3,
            CovStructure::HetFull => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        CovStructure::ALL.get(i.wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            CovStructure::HomSpherical => "HomSpherical",
            CovStructure::HomFull => "HomFull",
            CovStructure::HetSpherical => "HetSpherical",
            CovStructure::HetFull => "HetFull",
        }
    }

    pub fn homogeneous(self) -> bool {
        matches!(self, CovStructure::HomSpherical | CovStructure::HomFull)
    }

    pub fn spherical(self) -> bool {
        matches!(self, CovStructure::HomSpherical | CovStructure::HetSpherical)
    }
}

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
const MAX_REDRAWS: usize = 20;
const MAX_BISECTIONS: usize = 60;
const MAX_WISHART_TRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapSpec {
    pub k_star: usize,
    pub p: usize,
    pub omega_bar: f64,
    pub cov_type: CovStructure,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_mc() -> usize {
    DEFAULT_MC_SAMPLES
}

impl OverlapSpec {
    pub fn new(k_star: usize, p: usize, omega_bar: f64, cov_type: CovStructure, seed: u64) -> Self {
        OverlapSpec { k_star, p, omega_bar, cov_type, mc_samples: DEFAULT_MC_SAMPLES, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_star < 2 {
            return Err(Error::InvalidInput("overlap calibration needs K* >= 2".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(self.omega_bar > 0.0 && self.omega_bar < 1.0) {
            return Err(Error::Domain("target overlap must lie in (0, 1)"));
        }
        if self.mc_samples < 10_000 {
            return Err(Error::InvalidInput("at least 10^4 Monte-Carlo samples are required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapReport {
    /// `pairwise[k][l] = ω_{l|k}`; zero diagonal.
    pub pairwise: Vec<Vec<f64>>,
    pub omega_bar_hat: f64,
    pub mc_std_err: f64,
    pub c: f64,
}

/// How a generated dataset came to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub spec: OverlapSpec,
    pub c: f64,
    pub omega_bar_hat: f64,
    pub sample_seed: u64,
}

/// Direct Monte-Carlo estimate of `ω_{l|k}`.
pub fn pairwise_overlap(model: &GmmModel, k: usize, l: usize, mc_samples: usize, stream: Stream) -> Result<f64> {
    if k == l {
        return Err(Error::InvalidInput("overlap needs two distinct components".into()));
    }
    if k >= model.k() || l >= model.k() {
        return Err(Error::Dimension { expected: model.k(), found: k.max(l) + 1 });
    }
    if mc_samples == 0 {
        return Err(Error::InvalidInput("Monte-Carlo sample count must be positive".into()));
    }
    let prep = model.prepare()?;
    let p = model.p();
    let lk = &prep.chol[k];
    let mut rng = stream.rng();
    let mut z = vec![0.0; p];
    let mut x = vec![0.0; p];
    let mut scratch = vec![0.0; p];
    let mut hits = 0usize;
    for _ in 0..mc_samples {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let lz = lk.mul_lower(&z);
        for ((xi, m), d) in x.iter_mut().zip(&model.means()[k]).zip(&lz) {
            *xi = m + d;
        }
        let own = prep.log_weights[k] + prep.component_log_density(k, &x, &mut scratch);
        let other = prep.log_weights[l] + prep.component_log_density(l, &x, &mut scratch);
        if own < other {
            hits += 1;
        }
    }
    Ok(hits as f64 / mc_samples as f64)
}

/// Draws means, covariances and uniform weights for `spec` (before scaling).
pub fn generate_base_model(spec: &OverlapSpec, stream: Stream) -> Result<GmmModel> {
    if spec.k_star == 0 || spec.p == 0 {
        return Err(Error::InvalidInput("K* and p must be positive".into()));
    }
    let (k, p) = (spec.k_star, spec.p);
    let mut rng = stream.rng();
    let means: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
    let mut spherical = || {
        let sigma = 1.0 - rng.random::<f64>();
        Matrix::scaled_identity(p, sigma * sigma)
    };
    let covariances = match spec.cov_type {
        CovStructure::HomSpherical => vec![spherical(); k],
        CovStructure::HetSpherical => (0..k).map(|_| spherical()).collect(),
        CovStructure::HomFull => vec![wishart(p, &mut rng)?; k],
        CovStructure::HetFull => (0..k).map(|_| wishart(p, &mut rng)).collect::<Result<_>>()?,
    };
    GmmModel::new(vec![1.0 / k as f64; k], means, covariances)
}

/// Standard Wishart draw with `p + 1` degrees of freedom, divided by `p + 1`.
fn wishart<R: Rng>(p: usize, rng: &mut R) -> Result<Matrix> {
    let dof = p + 1;
    for _ in 0..MAX_WISHART_TRIES {
        let mut w = Matrix::zeros(p, p);
        let mut z = vec![0.0; p];
        for _ in 0..dof {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            for a in 0..p {
                for b in 0..p {
                    w[(a, b)] += z[a] * z[b];
                }
            }
        }
        let mut w = w.scaled(1.0 / dof as f64);
        w.symmetrize();
        if Cholesky::new(&w).is_some() {
            return Ok(w);
        }
    }
    Err(Error::SingularCovariance)
}

/// Draws of one directed pair, reduced to the set of `s = 1/√c` at which each
/// draw is misclassified. That set is an open interval `(lo, hi)`.
struct PairIntervals {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PairIntervals {
    fn count(&self, s: f64) -> usize {
        self.lo.partition_point(|&v| v < s) - self.hi.partition_point(|&v| v <= s)
    }
}

/// Common-random-number overlap estimator for every directed pair of a model.
struct OverlapSampler {
    k: usize,
    mc: usize,
    pairs: Vec<PairIntervals>,
}

impl OverlapSampler {
    fn new(model: &GmmModel, mc: usize, stream: Stream) -> Result<Self> {
        let (k, p) = (model.k(), model.p());
        let chol: Vec<Cholesky> = model
            .covariances()
            .iter()
            .map(|c| Cholesky::new(c).ok_or(Error::SingularCovariance))
            .collect::<Result<_>>()?;
        let score: Vec<f64> = (0..k).map(|j| model.weights()[j].ln() - 0.5 * chol[j].log_det()).collect();
        let mut pairs = Vec::with_capacity(k * (k - 1));
        let mut z = vec![0.0; p];
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                let same_cov = model.covariances()[a] == model.covariances()[b];
                let mut diff: Vec<f64> = model.means()[a].iter().zip(&model.means()[b]).map(|(x, y)| x - y).collect();
                chol[b].solve_lower_in_place(&mut diff);
                let aa = dot(&diff, &diff);
                let shift = 2.0 * (score[b] - score[a]);
                let mut rng = stream.child((a * k + b) as u64).rng();
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for _ in 0..mc {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let zz = dot(&z, &z);
                    let (aw, ww) = if same_cov {
                        (dot(&diff, &z), zz)
                    } else {
                        let mut w = chol[a].mul_lower(&z);
                        chol[b].solve_lower_in_place(&mut w);
                        (dot(&diff, &w), dot(&w, &w))
                    };
                    // Misclassified iff aa s² + 2 aw s + (ww − zz − shift) < 0.
                    if let Some((l, h)) = negative_interval(aa, 2.0 * aw, ww - zz - shift) {
                        lo.push(l);
                        hi.push(h);
                    }
                }
                lo.sort_by(f64::total_cmp);
                hi.sort_by(f64::total_cmp);
                pairs.push(PairIntervals { lo, hi });
            }
        }
        Ok(OverlapSampler { k, mc, pairs })
    }

    /// Directed overlaps at covariance scale `c`, row-major `k × k`.
    fn matrix(&self, c: f64) -> Vec<Vec<f64>> {
        let s = 1.0 / c.sqrt();
        let mut m = vec![vec![0.0; self.k]; self.k];
        let mut it = self.pairs.iter();
        for (a, row) in m.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                if a != b {
                    *cell = it.next().expect("one entry per pair").count(s) as f64 / self.mc as f64;
                }
            }
        }
        m
    }

    fn report(&self, c: f64) -> OverlapReport {
        let pairwise = self.matrix(c);
        let (mean, se) = summarize(&pairwise, self.mc);
        OverlapReport { pairwise, omega_bar_hat: mean, mc_std_err: se, c }
    }
}

/// Open interval where `a s² + b s + c < 0`, if any.
fn negative_interval(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a > 0.0 {
        let disc = b * b - 4.0 * a * c;
        if !(disc > 0.0) {
            return None;
        }
        let r = disc.sqrt();
        let q = -0.5 * (b + b.signum() * r);
        let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
        Some((r1.min(r2), r1.max(r2)))
    } else if b > 0.0 {
        Some((f64::NEG_INFINITY, -c / b))
    } else if b < 0.0 {
        Some((-c / b, f64::INFINITY))
    } else if c < 0.0 {
        Some((f64::NEG_INFINITY, f64::INFINITY))
    } else {
        None
    }
}

/// Mean of `ω_{kl} = ω_{k|l} + ω_{l|k}` over unordered pairs, with its standard error.
fn summarize(pairwise: &[Vec<f64>], mc: usize) -> (f64, f64) {
    let k = pairwise.len();
    let pairs = (k * (k - 1) / 2) as f64;
    let mut total = 0.0;
    let mut var = 0.0;
    for (a, row) in pairwise.iter().enumerate() {
        for (b, &w) in row.iter().enumerate() {
            if a != b {
                total += w;
                var += w * (1.0 - w) / mc as f64;
            }
        }
    }
    (total / pairs, var.sqrt() / pairs)
}

/// Estimates the full overlap report of `model` as given (`c = 1`).
pub fn overlap_report(model: &GmmModel, mc_samples: usize, stream: Stream) -> Result<OverlapReport> {
    if model.k() < 2 {
        return Err(Error::InvalidInput("overlap needs at least two components".into()));
    }
    Ok(OverlapSampler::new(model, mc_samples, stream)?.report(1.0))
}

/// Draws a base model and finds the covariance scale that hits `spec.omega_bar`.
pub fn calibrate_overlap(spec: &OverlapSpec) -> Result<(GmmModel, OverlapReport)> {
    spec.validate()?;
    let root = Stream::new(spec.seed);
    let target = spec.omega_bar;
    let mut best: Option<f64> = None;
    for attempt in 0..MAX_REDRAWS as u64 {
        let base = generate_base_model(spec, root.child_named("base").child(attempt))?;
        let sampler = OverlapSampler::new(&base, spec.mc_samples, root.child_named("mc").child(attempt))?;
        let accept = |r: &OverlapReport| (r.omega_bar_hat - target).abs() <= (0.05 * target).max(2.0 * r.mc_std_err);
        let mut closer = |r: &OverlapReport| {
            if best.is_none_or(|b| (r.omega_bar_hat - target).abs() < (b - target).abs()) {
                best = Some(r.omega_bar_hat);
            }
        };
        let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
        let low = sampler.report(lo.exp());
        let high = sampler.report(hi.exp());
        closer(&low);
        closer(&high);
        if low.omega_bar_hat > target && !accept(&low) || high.omega_bar_hat < target && !accept(&high) {
            continue;
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let r = sampler.report(mid.exp());
            closer(&r);
            if accept(&r) {
                let model = base.with_scaled_covariances(r.c);
                return Ok((model, r));
            }
            if r.omega_bar_hat < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Err(Error::CalibrationFailed { best: best.unwrap_or(f64::NAN) })
}

/// Calibrates a model for `spec`, then draws `n` labelled samples from it.
pub fn generate_scenario_dataset(
    spec: &OverlapSpec,
    n: usize,
    seed: u64,
) -> Result<(GmmModel, Dataset, OverlapReport)> {
    if n < spec.k_star {
        return Err(Error::InvalidInput("sample size must be at least K*".into()));
    }
    let (model, report) = calibrate_overlap(spec)?;
    let data = sample_model(&model, n, Stream::new(seed).child_named("sample"))?;
    let provenance =
        Provenance { spec: spec.clone(), c: report.c, omega_bar_hat: report.omega_bar_hat, sample_seed: seed };
    Ok((model, data.with_provenance(provenance), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;

    fn two_spherical(delta: f64, p: usize) -> GmmModel {
        let mut m2 = vec![0.0; p];
        m2[0] = delta;
        GmmModel::new(vec![0.5, 0.5], vec![vec![0.0; p], m2], vec![Matrix::identity(p); 2]).unwrap()
    }

    #[test]
    fn identical_components_never_overlap() {
        let m = GmmModel::new(vec![0.5, 0.5], vec![vec![0.3, 0.2]; 2], vec![Matrix::identity(2); 2]).unwrap();
        assert_eq!(pairwise_overlap(&m, 0, 1, 10_000, Stream::new(1)).unwrap(), 0.0);
        assert_eq!(overlap_report(&m, 10_000, Stream::new(1)).unwrap().omega_bar_hat, 0.0);
    }

    #[test]
    fn far_apart_components() {
        let m = two_spherical(100.0, 3);
        assert!(pairwise_overlap(&m, 0, 1, 10_000, Stream::new(2)).unwrap() < 1e-4);
    }

    #[test]
    fn half_space_oracle() {
        for (i, &delta) in [1.0, 3.0, 5.0].iter().enumerate() {
            for p in [1, 4] {
                let m = two_spherical(delta, p);
                let expect = normal_cdf(-delta / 2.0);
                let se = (expect * (1.0 - expect) / 1e5).sqrt();
                let direct = pairwise_overlap(&m, 0, 1, 100_000, Stream::new(i as u64)).unwrap();
                assert!((direct - expect).abs() <= 3.0 * se, "δ={delta}: {direct} vs {expect}");
                let r = overlap_report(&m, 100_000, Stream::new(10 + i as u64)).unwrap();
                assert!((r.pairwise[1][0] - expect).abs() <= 3.0 * se);
            }
        }
    }

    #[test]
    fn interval_counts_match_direct_evaluation() {
        // Heterogeneous full covariances and unequal weights, checked at several scales.
        let spec = OverlapSpec::new(3, 3, 0.05, CovStructure::HetFull, 9);
        let base = generate_base_model(&spec, Stream::new(3)).unwrap();
        let base = GmmModel::new(vec![0.2, 0.3, 0.5], base.means().to_vec(), base.covariances().to_vec()).unwrap();
        let sampler = OverlapSampler::new(&base, 20_000, Stream::new(4)).unwrap();
        for c in [0.01, 0.1, 1.0] {
            let m = sampler.matrix(c);
            let scaled = base.with_scaled_covariances(c);
            for a in 0..3 {
                for b in 0..3 {
                    if a == b {
                        continue;
                    }
                    let direct = pairwise_overlap(&scaled, a, b, 20_000, Stream::new(100 + a as u64)).unwrap();
                    let se = (direct * (1.0 - direct) / 20_000.0).sqrt().max(1e-3);
                    assert!((m[a][b] - direct).abs() <= 5.0 * se, "c={c} {a}->{b}: {} vs {direct}", m[a][b]);
                }
            }
        }
    }

    #[test]
    fn base_model_constraints() {
        let hs =
            generate_base_model(&OverlapSpec::new(4, 3, 0.01, CovStructure::HomSpherical, 0), Stream::new(5)).unwrap();
        let c0 = &hs.covariances()[0];
        assert!(hs.covariances().iter().all(|c| c == c0));
        assert!(c0.max_abs_diff(&Matrix::scaled_identity(3, c0[(0, 0)])) == 0.0);
        let hf = generate_base_model(&OverlapSpec::new(4, 3, 0.01, CovStructure::HetFull, 0), Stream::new(5)).unwrap();
        for a in 0..4 {
            assert!(Cholesky::new(&hf.covariances()[a]).is_some());
            for b in 0..a {
                assert_ne!(hf.covariances()[a], hf.covariances()[b]);
            }
        }
        assert!(hf.means().iter().flatten().all(|&m| (0.0..1.0).contains(&m)));
        assert!(hf.weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));
    }

    #[test]
    fn wishart_mean_is_identity() {
        let mut rng = Stream::new(6).rng();
        let mut acc = Matrix::zeros(2, 2);
        let draws = 10_000;
        for _ in 0..draws {
            acc.add_assign_scaled(&wishart(2, &mut rng).unwrap(), 1.0 / draws as f64);
        }
        assert!(acc.max_abs_diff(&Matrix::identity(2)) < 0.05, "{acc:?}");
    }

    #[test]
    fn calibration_two_components() {
        let spec = OverlapSpec::new(2, 2, 0.01, CovStructure::HomSpherical, 7);
        let (model, report) = calibrate_overlap(&spec).unwrap();
        assert!((report.omega_bar_hat - 0.01).abs() <= (0.05f64 * 0.01).max(2.0 * report.mc_std_err));
        let d = crate::linalg::sq_dist(&model.means()[0], &model.means()[1]).sqrt();
        let delta = d / model.covariances()[0][(0, 0)].sqrt();
        assert!((2.0 * normal_cdf(-delta / 2.0) - 0.01).abs() < 0.002, "δ = {delta}");
        let (_, loose) = calibrate_overlap(&OverlapSpec { omega_bar: 0.1, ..spec }).unwrap();
        assert!(loose.c > report.c);
    }

    #[test]
    fn report_shape_and_monotonicity() {
        let spec = OverlapSpec::new(3, 2, 0.05, CovStructure::HetSpherical, 8);
        let (model, report) = calibrate_overlap(&spec).unwrap();
        assert_eq!(report.pairwise.len(), 3);
        for (a, row) in report.pairwise.iter().enumerate() {
            assert_eq!(row[a], 0.0);
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
        let sampler = OverlapSampler::new(&model, 20_000, Stream::new(1)).unwrap();
        let mut prev = -1.0;
        for i in 0..10 {
            let r = sampler.report(10f64.powf(-2.0 + 0.4 * i as f64));
            assert!(r.omega_bar_hat >= prev);
            prev = r.omega_bar_hat;
        }
    }

    #[test]
    fn dataset_generation() {
        let spec = OverlapSpec::new(3, 2, 0.01, CovStructure::HomFull, 11);
        let (_, a, _) = generate_scenario_dataset(&spec, 3000, 5).unwrap();
        let (_, b, _) = generate_scenario_dataset(&spec, 3000, 5).unwrap();
        assert_eq!(a, b);
        let labels = a.labels().unwrap();
        for k in 0..3 {
            let count = labels.iter().filter(|&&l| l == k).count() as f64;
            let sd = (3000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
            assert!((count - 1000.0).abs() <= 4.0 * sd);
        }
        assert_eq!(a.provenance().unwrap().sample_seed, 5);
        assert!(generate_scenario_dataset(&spec, 2, 5).is_err());
        assert!(calibrate_overlap(&OverlapSpec { k_star: 1, ..spec.clone() }).is_err());
        assert!(calibrate_overlap(&OverlapSpec { omega_bar: 1.0, ..spec }).is_err());
    }
}
