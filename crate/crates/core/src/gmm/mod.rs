//! Gaussian mixtures: representation, densities, sampling, EM and the
//! model-selection criteria shared by the search algorithms.

mod criteria;
mod data;
mod density;
pub mod em;
mod model;

pub use criteria::{bic_xmeans, standard_bic, standard_bic_from_log_likelihood};
pub use data::{Dataset, Partition, Responsibilities};
pub use density::{e_step, e_step_with_log_likelihood, gaussian_log_density, mixture_log_likelihood, sample_model};
pub use em::{em_fit, m_step, EmFit, EmInit, EmOptions};
pub use model::{log_sum_exp, CovType, GmmModel, PreparedGmm};
