//! Sparse polynomial features for kernel principal components.
//!
//! The pipeline turns a numeric table into a handful of interpretable degree-2
//! polynomial terms: kernel PCA supplies self-supervised targets, a weighted
//! model-X knockoff filter scores every term against all targets at once, and
//! the scores are calibrated into p-values for selection.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataio;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod knockoff;
pub mod kpca;
pub mod linalg;
pub mod pipeline;
pub mod polybasis;
pub mod rng;
pub mod simulate;

pub use config::PipelineConfig;
pub use dataio::{load_csv, parse_csv, standardize, Dataset};
pub use error::{Error, Result, Stage};
pub use pipeline::{run_pipeline, run_pipeline_detailed, PipelineOutput, SelectionReport};
pub use polybasis::{build_basis, d_max, expand, PolyBasis, PolyTerm};
pub use simulate::{simulate_fdr, SimulationSpec, SimulationSummary};
