//! Cluster-count search for Gaussian mixture data.
//!
//! This crate is `no_std` (it needs `alloc`). It holds every numerical piece:
//! mixture densities and EM, the overlap-calibrated benchmark generator, the
//! statistical test kernels used by the splitting rules, the six search
//! algorithms, partition agreement metrics, and the group-lasso effects
//! analysis. File formats, timing, parallel execution and the command line
//! live in the `kseek` crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod effects;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod linalg;
pub mod overlap;
pub mod rng;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
pub use gmm::{CovType, Dataset, GmmModel, Partition, Responsibilities};
pub use rng::Stream;
pub use search::{Method, SearchConfig, SearchResult};
