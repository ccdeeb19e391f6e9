//! Pipeline configuration. Mirrors the flat key/value config file; every
//! field has a default so a partial file is valid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{PValueMethod, SelectionStrategy, VaryingOptions};
use crate::kernels::{Gamma, KernelKind, KernelSpec};
use crate::knockoff::{LambdaRule, LassoSettings, WekoOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kernel: KernelKind,
    pub gamma: Gamma,
    pub coef0: f64,
    pub rff_dim: usize,
    pub num_components: usize,
    pub fdr_q: f64,
    pub selection: SelectionStrategy,
    pub pvalue_method: PValueMethod,
    pub seed: u64,
    pub lambda_rule: LambdaRule,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    /// Covariance shrinkage toward the identity on the correlation scale.
    pub shrinkage: f64,
    pub max_rows: usize,
    /// Candidate lengths for `selection = "auto"`.
    pub cv_candidates: Vec<usize>,
    pub cv_folds: usize,
    pub ridge_alpha: f64,
    /// Fit each component on its own knockoff-selected support.
    pub component_fits: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kernel: KernelKind::Rbf,
            gamma: Gamma::Auto,
            coef0: 1.0,
            rff_dim: 2000,
            num_components: 50,
            fdr_q: 0.2,
            selection: SelectionStrategy::Threshold { alpha: 0.05 },
            pvalue_method: PValueMethod::Percentile,
            seed: 0,
            lambda_rule: LambdaRule::default(),
            lasso_tol: 1e-7,
            lasso_max_iter: 10_000,
            shrinkage: 0.05,
            max_rows: 15_000,
            cv_candidates: vec![10, 20, 50, 100, 150],
            cv_folds: 5,
            ridge_alpha: 1e-3,
            component_fits: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        PipelineConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.kernel_spec().validate()?;
        if self.num_components == 0 {
            return bad("num_components must be at least 1".into());
        }
        if !(self.fdr_q > 0.0 && self.fdr_q <= 1.0) {
            return bad(format!("fdr_q must lie in (0, 1], got {}", self.fdr_q));
        }
        if !(0.0..1.0).contains(&self.shrinkage) {
            return bad(format!("shrinkage must lie in [0, 1), got {}", self.shrinkage));
        }
        if !(self.lasso_tol > 0.0 && self.lasso_tol.is_finite()) {
            return bad(format!("lasso_tol must be positive, got {}", self.lasso_tol));
        }
        if self.lasso_max_iter == 0 {
            return bad("lasso_max_iter must be at least 1".into());
        }
        if self.max_rows < 2 {
            return bad(format!("max_rows must be at least 2, got {}", self.max_rows));
        }
        if self.cv_candidates.is_empty() || self.cv_candidates.contains(&0) {
            return bad("cv_candidates must be a nonempty list of positive counts".into());
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if !(self.ridge_alpha >= 0.0 && self.ridge_alpha.is_finite()) {
            return bad(format!("ridge_alpha must be ≥ 0, got {}", self.ridge_alpha));
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec {
            kind: self.kernel,
            gamma: self.gamma,
            coef0: self.coef0,
            rff_dim: self.rff_dim,
            rff_seed: self.seed,
        }
    }

    pub fn weko_options(&self) -> WekoOptions {
        WekoOptions {
            shrinkage: self.shrinkage,
            lambda_rule: self.lambda_rule,
            lasso: LassoSettings {
                tol: self.lasso_tol,
                max_iter: self.lasso_max_iter,
            },
        }
    }

    /// Options for varying-length selection with candidates larger than
    /// `d_max` removed (falling back to `d_max` itself).
    pub fn varying_options(&self, d_max: usize) -> VaryingOptions {
        let mut candidates: Vec<usize> = self.cv_candidates.iter().copied().filter(|&r| r <= d_max).collect();
        if candidates.is_empty() {
            candidates.push(d_max);
        }
        VaryingOptions {
            candidates,
            folds: self.cv_folds,
            ridge_alpha: self.ridge_alpha,
            seed: self.seed,
        }
    }
}
