use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// A categorical factor and its level names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

/// Sum-to-zero contrast of `levels` levels: the identity stacked on a row of −1.
pub fn sum_to_zero(levels: usize) -> Matrix {
    let mut c = Matrix::zeros(levels, levels.saturating_sub(1));
    for l in 0..levels.saturating_sub(1) {
        c[(l, l)] = 1.0;
        c[(levels - 1, l)] = -1.0;
    }
    c
}

/// Row-wise Kronecker product of per-factor contrasts, first factor fastest.
///
/// Row `l0 + L0·(l1 + L1·(…))` holds the coded columns of that level
/// combination; column `a0 + (L0−1)·(a1 + …)` is the coefficient index. The
/// same matrix maps a group's coefficients β to its level effects α = Cβ.
pub fn block_contrast(contrasts: &[&Matrix]) -> Matrix {
    let rows: usize = contrasts.iter().map(|c| c.rows()).product();
    let cols: usize = contrasts.iter().map(|c| c.cols()).product();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let (mut rr, mut cc, mut v) = (r, c, 1.0);
            for m in contrasts {
                v *= m[(rr % m.rows(), cc % m.cols())];
                rr /= m.rows();
                cc /= m.cols();
            }
            out[(r, c)] = v;
        }
    }
    out
}

/// All factor subsets up to `max_order` factors: every main effect, plus the
/// interactions that contain `pivot` (or every interaction when `pivot` is
/// `None`). Ordered by size, then lexicographically.
pub fn interaction_groups(n_factors: usize, pivot: Option<usize>, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for order in 1..=max_order.min(n_factors) {
        let mut combo: Vec<usize> = (0..order).collect();
        loop {
            if order == 1 || pivot.is_none_or(|p| combo.contains(&p)) {
                out.push(combo.clone());
            }
            let Some(i) = (0..order).rev().find(|&i| combo[i] < n_factors - order + i) else { break };
            combo[i] += 1;
            for j in i + 1..order {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

/// Contrast-coded design of a factorial table.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorDesign {
    factors: Vec<Factor>,
    contrasts: Vec<Matrix>,
    groups: Vec<Vec<usize>>,
    group_contrasts: Vec<Matrix>,
    offsets: Vec<usize>,
    cells: Vec<Vec<usize>>,
    x: Matrix,
    dropped: Vec<String>,
}

impl FactorDesign {
    /// Builds the design for `cells` (one level index per factor per row).
    ///
    /// Factors with fewer than two levels are dropped together with every
    /// group that mentions them; their names are listed in [`Self::dropped`].
    pub fn new(factors: Vec<Factor>, cells: &[Vec<usize>], groups: &[Vec<usize>]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidInput("design needs at least one row".into()));
        }
        for row in cells {
            if row.len() != factors.len() {
                return Err(Error::Dimension { expected: factors.len(), found: row.len() });
            }
            if row.iter().zip(&factors).any(|(&l, f)| l >= f.levels.len()) {
                return Err(Error::InvalidInput("level index out of range".into()));
            }
        }
        let keep: Vec<bool> = factors.iter().map(|f| f.levels.len() >= 2).collect();
        let mut remap = vec![usize::MAX; factors.len()];
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (i, f) in factors.into_iter().enumerate() {
            if keep[i] {
                remap[i] = kept.len();
                kept.push(f);
            } else {
                dropped.push(f.name);
            }
        }
        let mut new_groups: Vec<Vec<usize>> = Vec::new();
        for g in groups {
            if g.is_empty() || g.iter().any(|&f| f >= keep.len()) {
                return Err(Error::InvalidInput("group refers to an unknown factor".into()));
            }
            if g.iter().all(|&f| keep[f]) {
                let mut m: Vec<usize> = g.iter().map(|&f| remap[f]).collect();
                m.sort_unstable();
                m.dedup();
                if !new_groups.contains(&m) {
                    new_groups.push(m);
                }
            }
        }
        let cells: Vec<Vec<usize>> =
            cells.iter().map(|row| row.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| *l).collect()).collect();
        let contrasts: Vec<Matrix> = kept.iter().map(|f| sum_to_zero(f.levels.len())).collect();
        let group_contrasts: Vec<Matrix> =
            new_groups.iter().map(|g| block_contrast(&g.iter().map(|&f| &contrasts[f]).collect::<Vec<_>>())).collect();
        let mut offsets = vec![0];
        for c in &group_contrasts {
            offsets.push(offsets.last().unwrap() + c.cols());
        }
        let d = *offsets.last().unwrap();
        let mut x = Matrix::zeros(cells.len(), d);
        for (i, row) in cells.iter().enumerate() {
            for (j, g) in new_groups.iter().enumerate() {
                let idx = level_index(g, &kept, row);
                let c = &group_contrasts[j];
                x.row_mut(i)[offsets[j]..offsets[j + 1]].copy_from_slice(c.row(idx));
            }
        }
        Ok(FactorDesign { factors: kept, contrasts, groups: new_groups, group_contrasts, offsets, cells, x, dropped })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Factor indices of every group.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn contrast(&self, factor: usize) -> &Matrix {
        &self.contrasts[factor]
    }

    /// The block contrast `C_j` of group `j`.
    pub fn group_contrast(&self, j: usize) -> &Matrix {
        &self.group_contrasts[j]
    }

    pub fn group_size(&self, j: usize) -> usize {
        self.offsets[j + 1] - self.offsets[j]
    }

    pub fn group_columns(&self, j: usize) -> core::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Rows `N`.
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Penalized columns `D = Σ D_j` (the intercept is not included).
    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    /// Display name of group `j`, factor names joined by `:`.
    pub fn group_name(&self, j: usize) -> String {
        let names: Vec<&str> = self.groups[j].iter().map(|&f| self.factors[f].name.as_str()).collect();
        names.join(":")
    }

    pub fn find_group(&self, names: &[&str]) -> Option<usize> {
        let mut idx: Vec<usize> =
            names.iter().map(|n| self.factors.iter().position(|f| f.name == *n)).collect::<Option<_>>()?;
        idx.sort_unstable();
        self.groups.iter().position(|g| *g == idx)
    }
}

/// Row of the block contrast for the levels `row` takes on the factors of `group`.
pub(crate) fn level_index(group: &[usize], factors: &[Factor], row: &[usize]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for &f in group {
        idx += row[f] * stride;
        stride *= factors[f].levels.len();
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn factor(name: &str, n: usize) -> Factor {
        Factor { name: name.to_string(), levels: (0..n).map(|l| alloc::format!("{name}{l}")).collect() }
    }

    #[test]
    fn thirty_one_groups_for_six_factors() {
        let g = interaction_groups(6, Some(0), 4);
        assert_eq!(g.len(), 31);
        assert_eq!(g.iter().filter(|g| g.len() == 1).count(), 6);
        assert!(g.iter().filter(|g| g.len() > 1).all(|g| g.contains(&0)));
        assert_eq!(interaction_groups(3, None, 3).len(), 7);
    }

    #[test]
    fn contrast_columns_sum_to_zero() {
        let c = sum_to_zero(4);
        for j in 0..3 {
            assert_eq!(c.column(j).iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn block_contrast_is_kronecker() {
        let a = sum_to_zero(3);
        let b = sum_to_zero(4);
        // First factor fastest is kron(B, A).
        assert_eq!(block_contrast(&[&a, &b]), b.kron(&a));
    }

    #[test]
    fn interaction_block_width() {
        let f = vec![factor("a", 3), factor("b", 4)];
        let cells: Vec<Vec<usize>> = (0..12).map(|i| vec![i % 3, i / 3]).collect();
        let d = FactorDesign::new(f, &cells, &[vec![0], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(d.group_size(0), 2);
        assert_eq!(d.group_size(1), 3);
        assert_eq!(d.group_size(2), 6);
        assert_eq!(d.d(), 11);
    }

    #[test]
    fn single_level_factor_is_dropped() {
        let f = vec![factor("a", 3), factor("z", 1)];
        let cells: Vec<Vec<usize>> = (0..6).map(|i| vec![i % 3, 0]).collect();
        let d = FactorDesign::new(f, &cells, &[vec![0], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(d.dropped(), &["z".to_string()]);
        assert_eq!(d.n_groups(), 1);
        assert_eq!(d.group_name(0), "a");
    }
}
