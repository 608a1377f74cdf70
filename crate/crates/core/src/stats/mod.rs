//! Test statistics used by the splitting criteria.

mod ad;
mod dip;
mod ks;
mod normal;

use alloc::vec::Vec;

pub use ad::{ad_critical_value, ad_statistic, AD_CRITICAL_1E4};
pub use dip::{dip_statistic, dip_test, DipNull, DipResult, DipWorkspace};
pub use ks::{kolmogorov_critical, kolmogorov_tail, ks_critical_value, ks_statistic};
pub use normal::{normal_cdf, probit};

use crate::{Error, Result};

/// A finite, nondecreasing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample(Vec<f64>);

impl SortedSample {
    /// Wraps `values`, which must already be sorted.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample contains non-finite values".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("sample is not sorted".into()));
        }
        Ok(SortedSample(values))
    }

    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample contains non-finite values".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(SortedSample(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}
