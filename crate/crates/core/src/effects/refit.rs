use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::FactorDesign;
use crate::linalg::{dot, spd_inverse_with_ridge, Matrix};
use crate::stats::probit;
use crate::{Error, Result};

/// Relative ridge used when the selected columns are rank deficient.
pub const REFIT_RIDGE: f64 = 1e-10;

/// Ordinary least squares on the intercept plus the columns of `groups`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refit {
    pub groups: Vec<usize>,
    pub intercept: f64,
    /// Coefficients of the selected groups, concatenated in `groups` order.
    pub coef: Vec<f64>,
    pub rss: f64,
    /// `rss / (N − q)`; NaN when there are no residual degrees of freedom.
    pub sigma2: f64,
    /// `−2ℓ + (q + 1) log N` with the Gaussian maximum-likelihood ℓ.
    pub bic: f64,
    /// `(XᵀX)⁻¹` over `[intercept, coef]`.
    pub xtx_inv: Matrix,
    /// Whether the ridge fallback was used.
    pub ridged: bool,
}

impl Refit {
    /// Offset of group `groups[k]`'s block within `coef`.
    fn block_offset(&self, design: &FactorDesign, k: usize) -> usize {
        self.groups[..k].iter().map(|&g| design.group_size(g)).sum()
    }
}

pub fn refit(design: &FactorDesign, y: &[f64], groups: &[usize]) -> Result<Refit> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, found: y.len() });
    }
    if let Some(&g) = groups.iter().find(|&&g| g >= design.n_groups()) {
        return Err(Error::InvalidInput(alloc::format!("no group {g}")));
    }
    let cols: Vec<usize> = groups.iter().flat_map(|&g| design.group_columns(g)).collect();
    let q = cols.len() + 1;
    let row = |i: usize| -> Vec<f64> {
        let x = design.x().row(i);
        core::iter::once(1.0).chain(cols.iter().map(|&c| x[c])).collect()
    };
    let mut xtx = Matrix::zeros(q, q);
    let mut xty = vec![0.0; q];
    for i in 0..n {
        let r = row(i);
        for a in 0..q {
            xty[a] += r[a] * y[i];
            for b in a..q {
                xtx[(a, b)] += r[a] * r[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let (xtx_inv, ridged) = spd_inverse_with_ridge(&xtx, REFIT_RIDGE).ok_or(Error::SingularCovariance)?;
    let beta = xtx_inv.mul_vec(&xty);
    let rss: f64 = (0..n).map(|i| (y[i] - dot(&row(i), &beta)).powi(2)).sum();
    let nf = n as f64;
    let sigma2 = if n > q { rss / (n - q) as f64 } else { f64::NAN };
    let bic = nf * (2.0 * core::f64::consts::PI * rss / nf).ln() + nf + (q as f64 + 1.0) * nf.ln();
    Ok(Refit {
        groups: groups.to_vec(),
        intercept: beta[0],
        coef: beta[1..].to_vec(),
        rss,
        sigma2,
        bic,
        xtx_inv,
        ridged,
    })
}

/// Level effects `α_j = C_j β_j` of one group with their variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    pub group: usize,
    pub alpha: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Loading matrix mapping `[intercept, coef]` to the level effects of `refit.groups[k]`.
fn loading(design: &FactorDesign, refit: &Refit, k: usize) -> Matrix {
    let g = refit.groups[k];
    let c = design.group_contrast(g);
    let off = 1 + refit.block_offset(design, k);
    let mut l = Matrix::zeros(c.rows(), 1 + refit.coef.len());
    for r in 0..c.rows() {
        l.row_mut(r)[off..off + c.cols()].copy_from_slice(c.row(r));
    }
    l
}

fn apply(l: &Matrix, refit: &Refit) -> (Vec<f64>, Vec<f64>) {
    let full: Vec<f64> = core::iter::once(refit.intercept).chain(refit.coef.iter().copied()).collect();
    let alpha = l.mul_vec(&full);
    let variance = (0..l.rows()).map(|r| dot(l.row(r), &refit.xtx_inv.mul_vec(l.row(r))) * refit.sigma2).collect();
    (alpha, variance)
}

/// `α = Cβ` and `diag(C (XᵀX)⁻¹ Cᵀ) σ̂²` for every refitted group.
pub fn recover_redundant(design: &FactorDesign, refit: &Refit) -> Vec<Recovered> {
    (0..refit.groups.len())
        .map(|k| {
            let (alpha, variance) = apply(&loading(design, refit, k), refit);
            Recovered { group: refit.groups[k], alpha, variance }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub levels: Vec<String>,
    pub effect: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
    /// The interval excludes zero.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    pub name: String,
    pub factors: Vec<String>,
    pub rows: Vec<EffectRow>,
}

/// Effect tables of every refitted group with Wald intervals at `confidence`.
///
/// Each `(from, into)` pair in `absorb` adds the effects of group `from` to
/// those of `into` (whose factors must include `from`'s) and drops `from`'s
/// table. Variances account for the covariance between the two blocks.
pub fn effect_tables(
    design: &FactorDesign,
    refit: &Refit,
    confidence: f64,
    absorb: &[(usize, usize)],
) -> Result<Vec<EffectTable>> {
    let z = probit(0.5 + 0.5 * confidence)?;
    let mut loads: Vec<Option<Matrix>> = (0..refit.groups.len()).map(|k| Some(loading(design, refit, k))).collect();
    let pos = |g: usize| refit.groups.iter().position(|&h| h == g);
    for &(from, into) in absorb {
        let (Some(a), Some(b)) = (pos(from), pos(into)) else {
            return Err(Error::InvalidInput("absorbed groups must both be selected".into()));
        };
        let fa = &design.groups()[from];
        let fb = &design.groups()[into];
        if a == b || !fa.iter().all(|f| fb.contains(f)) {
            return Err(Error::InvalidInput("an absorbed group's factors must be a subset of the target's".into()));
        }
        let src = loads[a].take().ok_or_else(|| Error::InvalidInput("group absorbed twice".into()))?;
        let dst = loads[b].as_mut().ok_or_else(|| Error::InvalidInput("target already absorbed".into()))?;
        for r in 0..dst.rows() {
            let levels = decode(design, fb, r);
            let mut idx = 0;
            let mut stride = 1;
            for &f in fa {
                let pos = fb.iter().position(|&h| h == f).expect("subset");
                idx += levels[pos] * stride;
                stride *= design.factors()[f].levels.len();
            }
            for (d, s) in dst.row_mut(r).iter_mut().zip(src.row(idx)) {
                *d += s;
            }
        }
    }
    let mut out = Vec::new();
    for (k, l) in loads.iter().enumerate() {
        let Some(l) = l else { continue };
        let g = refit.groups[k];
        let fs = &design.groups()[g];
        let (alpha, variance) = apply(l, refit);
        let rows = (0..l.rows())
            .map(|r| {
                let levels = decode(design, fs, r)
                    .iter()
                    .zip(fs)
                    .map(|(&lv, &f)| design.factors()[f].levels[lv].clone())
                    .collect();
                let se = variance[r].max(0.0).sqrt();
                let (lower, upper) = (alpha[r] - z * se, alpha[r] + z * se);
                EffectRow {
                    levels,
                    effect: alpha[r],
                    std_err: se,
                    lower,
                    upper,
                    significant: lower > 0.0 || upper < 0.0,
                }
            })
            .collect();
        out.push(EffectTable {
            name: design.group_name(g),
            factors: fs.iter().map(|&f| design.factors()[f].name.clone()).collect(),
            rows,
        });
    }
    Ok(out)
}

/// Per-factor levels of block row `r`, first factor fastest.
fn decode(design: &FactorDesign, factors: &[usize], mut r: usize) -> Vec<usize> {
    factors
        .iter()
        .map(|&f| {
            let n = design.factors()[f].levels.len();
            let l = r % n;
            r /= n;
            l
        })
        .collect()
}
