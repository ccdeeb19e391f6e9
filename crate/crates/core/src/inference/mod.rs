//! From weighted scores to p-values, selected feature sets and per-component
//! sparse fits.

mod pvalues;
mod regression;
mod select;

pub use pvalues::{pvalues_lognormal, pvalues_percentile, pvalues_percentile_active, PValueMethod, PValueVector};
pub use regression::{fit_component, ridge_fit, ComponentFit};
pub use select::{
    canonical_order, cv_objective, select_bh, select_fixed, select_threshold, select_varying, CandidateScore,
    SelectionResult, SelectionStrategy, VaryingOptions,
};
