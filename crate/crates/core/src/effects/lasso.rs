use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::FactorDesign;
use crate::linalg::{sym_eigen, Matrix};
use crate::{Error, Result};

/// Extended BIC `N log(rss/N) + m log N + 2 log C(D, m)`.
pub fn ebic(rss: f64, n: usize, m: usize, d: usize) -> Result<f64> {
    if !(rss > 0.0) || m > d || n == 0 {
        return Err(Error::Domain("EBIC needs rss > 0, n > 0 and m <= D"));
    }
    let nf = n as f64;
    let log_binom = libm::lgamma(d as f64 + 1.0) - libm::lgamma(m as f64 + 1.0) - libm::lgamma((d - m) as f64 + 1.0);
    Ok(nf * (rss / nf).ln() + m as f64 * nf.ln() + 2.0 * log_binom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Converged when no coefficient moves more than this in a sweep.
    pub tol: f64,
    /// Also required: the largest KKT residual is at most this.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-7, kkt_tol: 1e-8, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub lambda: f64,
    pub intercept: f64,
    /// Penalized coefficients, groups concatenated in design order.
    pub beta: Vec<f64>,
    pub rss: f64,
    pub sweeps: usize,
}

impl LassoFit {
    /// Indices of groups with a nonzero block.
    pub fn active_groups(&self, design: &FactorDesign) -> Vec<usize> {
        (0..design.n_groups()).filter(|&j| self.beta[design.group_columns(j)].iter().any(|b| *b != 0.0)).collect()
    }

    /// Nonzero penalized coefficients.
    pub fn nonzero(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub fit: LassoFit,
    pub active: Vec<usize>,
    pub m: usize,
    pub ebic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub points: Vec<PathPoint>,
    /// Index of the EBIC minimizer (first on ties, i.e. the largest λ).
    pub selected: usize,
}

/// Group lasso `½‖y − b₀ − Xβ‖² + λ Σ_j √D_j ‖β_j‖` with an unpenalized intercept.
///
/// Each block update is exact: the block problem is diagonalized once by an
/// eigendecomposition of `X_jᵀX_j` and the shrinkage solved as a scalar root.
#[derive(Debug, Clone)]
pub struct GroupLasso<'a> {
    design: &'a FactorDesign,
    xc: Matrix,
    yc: Vec<f64>,
    y_mean: f64,
    x_means: Vec<f64>,
    grams: Vec<Matrix>,
    eigen: Vec<(Vec<f64>, Matrix)>,
}

impl<'a> GroupLasso<'a> {
    pub fn new(design: &'a FactorDesign, y: &[f64]) -> Result<Self> {
        let n = design.n();
        if y.len() != n {
            return Err(Error::Dimension { expected: n, found: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("response contains non-finite values".into()));
        }
        let d = design.d();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = y.iter().map(|v| v - y_mean).collect();
        let mut x_means = vec![0.0; d];
        for i in 0..n {
            for (m, v) in x_means.iter_mut().zip(design.x().row(i)) {
                *m += v / n as f64;
            }
        }
        let mut xc = design.x().clone();
        for i in 0..n {
            for (v, m) in xc.row_mut(i).iter_mut().zip(&x_means) {
                *v -= m;
            }
        }
        let mut grams = Vec::with_capacity(design.n_groups());
        let mut eigen = Vec::with_capacity(design.n_groups());
        for j in 0..design.n_groups() {
            let cols = design.group_columns(j);
            let dj = cols.len();
            let mut g = Matrix::zeros(dj, dj);
            for i in 0..n {
                let row = &xc.row(i)[cols.clone()];
                for a in 0..dj {
                    for b in a..dj {
                        g[(a, b)] += row[a] * row[b];
                    }
                }
            }
            for a in 0..dj {
                for b in 0..a {
                    g[(a, b)] = g[(b, a)];
                }
            }
            eigen.push(sym_eigen(&g));
            grams.push(g);
        }
        Ok(GroupLasso { design, xc, yc, y_mean, x_means, grams, eigen })
    }

    /// Smallest λ at which every penalized group is zero.
    pub fn lambda_max(&self) -> f64 {
        let r = &self.yc;
        (0..self.design.n_groups())
            .map(|j| norm2(&self.block_gradient(j, r)) / (self.design.group_size(j) as f64).sqrt())
            .fold(0.0, f64::max)
    }

    fn block_gradient(&self, j: usize, r: &[f64]) -> Vec<f64> {
        let cols = self.design.group_columns(j);
        let mut g = vec![0.0; cols.len()];
        for (i, ri) in r.iter().enumerate() {
            for (gk, x) in g.iter_mut().zip(&self.xc.row(i)[cols.clone()]) {
                *gk += x * ri;
            }
        }
        g
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.design.n()).map(|i| self.yc[i] - crate::linalg::dot(self.xc.row(i), beta)).collect()
    }

    /// Minimizer of `½βᵀGβ − gᵀβ + c‖β‖` for group `j`.
    fn block_solve(&self, j: usize, g: &[f64], c: f64) -> Vec<f64> {
        if norm2(g) <= c {
            return vec![0.0; g.len()];
        }
        let (lam, q) = &self.eigen[j];
        let gt = q.tr_mul_vec(g);
        let top = lam.first().copied().unwrap_or(0.0).max(0.0);
        let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
        let scale: Vec<f64> = if c == 0.0 {
            lam.iter().map(|&l| if l > floor { 1.0 / l } else { 0.0 }).collect()
        } else {
            let h = |t: f64| gt.iter().zip(lam).map(|(gi, &l)| gi * gi / (l.max(0.0) * t + c).powi(2)).sum::<f64>();
            let mut hi = 1.0;
            for _ in 0..2048 {
                if h(hi) < 1.0 {
                    break;
                }
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-16 * hi {
                    break;
                }
            }
            let t = 0.5 * (lo + hi);
            lam.iter().map(|&l| t / (l.max(0.0) * t + c)).collect()
        };
        let z: Vec<f64> = gt.iter().zip(&scale).map(|(a, s)| a * s).collect();
        q.mul_vec(&z)
    }

    /// Fits at `lambda`, starting from `warm` (zeros when `None`).
    pub fn fit(&self, lambda: f64, warm: Option<&[f64]>, opts: &LassoOptions) -> Result<LassoFit> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain("lambda must be nonnegative"));
        }
        let d = self.design.d();
        let mut beta = warm.map_or_else(|| vec![0.0; d], <[f64]>::to_vec);
        if beta.len() != d {
            return Err(Error::Dimension { expected: d, found: beta.len() });
        }
        let mut r = self.residual(&beta);
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut change: f64 = 0.0;
            for j in 0..self.design.n_groups() {
                let cols = self.design.group_columns(j);
                let old = beta[cols.clone()].to_vec();
                let mut g = self.block_gradient(j, &r);
                for (gk, v) in g.iter_mut().zip(self.grams[j].mul_vec(&old)) {
                    *gk += v;
                }
                let c = lambda * (cols.len() as f64).sqrt();
                let new = self.block_solve(j, &g, c);
                let delta: Vec<f64> = new.iter().zip(&old).map(|(a, b)| a - b).collect();
                if delta.iter().any(|v| *v != 0.0) {
                    for (i, ri) in r.iter_mut().enumerate() {
                        *ri -= crate::linalg::dot(&self.xc.row(i)[cols.clone()], &delta);
                    }
                    change = delta.iter().fold(change, |m, v| m.max(v.abs()));
                    beta[cols].copy_from_slice(&new);
                }
            }
            if change < opts.tol && self.kkt_from_residual(lambda, &beta, &r) <= opts.kkt_tol {
                break;
            }
            if sweeps >= opts.max_sweeps {
                return Err(Error::NoConvergence { sweeps, last: beta });
            }
        }
        let intercept = self.y_mean - crate::linalg::dot(&self.x_means, &beta);
        let rss = r.iter().map(|v| v * v).sum();
        Ok(LassoFit { lambda, intercept, beta, rss, sweeps })
    }

    /// Largest KKT violation of `fit`: for zero groups the excess of
    /// `‖X_jᵀr‖` over `λ√D_j`, for active groups the stationarity residual.
    pub fn kkt_residual(&self, fit: &LassoFit) -> f64 {
        self.kkt_from_residual(fit.lambda, &fit.beta, &self.residual(&fit.beta))
    }

    fn kkt_from_residual(&self, lambda: f64, beta: &[f64], r: &[f64]) -> f64 {
        (0..self.design.n_groups())
            .map(|j| {
                let cols = self.design.group_columns(j);
                let c = lambda * (cols.len() as f64).sqrt();
                let g = self.block_gradient(j, r);
                let b = &beta[cols];
                let nb = norm2(b);
                if nb == 0.0 {
                    (norm2(&g) - c).max(0.0)
                } else {
                    let s: Vec<f64> = g.iter().zip(b).map(|(gk, bk)| gk - c * bk / nb).collect();
                    norm2(&s)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Warm-started path over `n_lambda` log-spaced values from `λ_max`
    /// down to `min_ratio · λ_max`, scored by EBIC.
    pub fn path(&self, n_lambda: usize, min_ratio: f64, opts: &LassoOptions) -> Result<LassoPath> {
        if n_lambda < 2 || !(min_ratio > 0.0 && min_ratio < 1.0) {
            return Err(Error::InvalidInput("path needs >= 2 lambdas and a ratio in (0, 1)".into()));
        }
        let lmax = self.lambda_max();
        let lambdas: Vec<f64> = if lmax > 0.0 {
            (0..n_lambda).map(|k| lmax * min_ratio.powf(k as f64 / (n_lambda - 1) as f64)).collect()
        } else {
            vec![0.0]
        };
        let n = self.design.n();
        let d = self.design.d();
        let mut points: Vec<PathPoint> = Vec::with_capacity(lambdas.len());
        for &lambda in &lambdas {
            let warm = points.last().map(|p| p.fit.beta.as_slice());
            let fit = self.fit(lambda, warm, opts)?;
            let m = fit.nonzero();
            let score = ebic(fit.rss.max(f64::MIN_POSITIVE), n, m, d)?;
            points.push(PathPoint { active: fit.active_groups(self.design), m, ebic: score, fit });
        }
        let selected = (0..points.len()).fold(0, |b, k| if points[k].ebic < points[b].ebic { k } else { b });
        Ok(LassoPath { points, selected })
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ebic_worked_example() {
        let v = ebic(100.0, 100, 3, 10).unwrap();
        assert_abs_diff_eq!(v, 3.0 * 100f64.ln() + 2.0 * 120f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(v, 23.3905, epsilon = 1e-3);
        assert_abs_diff_eq!(ebic(50.0, 100, 0, 10).unwrap(), 100.0 * 0.5f64.ln(), epsilon = 1e-12);
        assert!(ebic(0.0, 10, 1, 3).is_err());
        assert!(ebic(1.0, 10, 4, 3).is_err());
    }
}
