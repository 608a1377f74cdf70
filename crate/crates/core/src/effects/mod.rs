//! Factorial effects analysis of simulation results: sum-to-zero designs,
//! group lasso selection tuned by EBIC, least-squares refit and recovery of
//! per-level effects.

mod design;
mod lasso;
mod refit;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use design::{block_contrast, interaction_groups, sum_to_zero, Factor, FactorDesign};
pub use lasso::{ebic, GroupLasso, LassoFit, LassoOptions, LassoPath, PathPoint};
pub use refit::{effect_tables, recover_redundant, refit, EffectRow, EffectTable, Recovered, Refit, REFIT_RIDGE};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub n_lambda: usize,
    pub min_ratio: f64,
    pub lasso: LassoOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { n_lambda: 100, min_ratio: 1e-3, lasso: LassoOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub path: LassoPath,
    pub selected: Vec<usize>,
    pub refit: Refit,
    /// BIC of the least-squares fit on every group, for comparison.
    pub full_bic: f64,
}

/// Path, EBIC selection and refit in one call.
pub fn analyze(design: &FactorDesign, y: &[f64], opts: &AnalysisOptions) -> Result<Analysis> {
    let gl = GroupLasso::new(design, y)?;
    let path = gl.path(opts.n_lambda, opts.min_ratio, &opts.lasso)?;
    let selected = path.points[path.selected].active.clone();
    let fit = refit(design, y, &selected)?;
    let all: Vec<usize> = (0..design.n_groups()).collect();
    let full_bic = refit(design, y, &all)?.bic;
    Ok(Analysis { path, selected, refit: fit, full_bic })
}
