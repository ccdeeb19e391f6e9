//! End-to-end orchestration: signals from kernel PCA, polynomial expansion,
//! weighted knockoff scores, p-values and selection, plus the JSON report.

use std::time::Instant;

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::dataio::{standardize, subsample, Dataset};
use crate::error::{Result, Stage, StageExt};
use crate::inference::{
    fit_component, pvalues_lognormal, pvalues_percentile_active, select_bh, select_fixed, select_threshold,
    select_varying, PValueMethod, PValueVector, SelectionResult, SelectionStrategy,
};
use crate::kernels::{center, kernel_matrix, KernelKind};
use crate::knockoff::{knockoff_threshold, weko, WekoScores};
use crate::kpca::{s4gen, SignalBundle};
use crate::polybasis::{build_basis, expand, term_names, FeatureMatrix};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub rows_input: usize,
    pub rows_used: usize,
    pub columns: Vec<String>,
    pub dropped_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub kind: KernelKind,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coef0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rff_dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KnockoffSummary {
    pub shrinkage: f64,
    pub lambda_min: f64,
    pub s: f64,
    pub active_features: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureRecord {
    pub index: usize,
    pub name: String,
    pub term: &'static str,
    pub score: f64,
    pub p_value: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionSummary {
    #[serde(flatten)]
    pub result: SelectionResult,
    pub selected_names: Vec<String>,
}

/// Per-component diagnostics: knockoff+ selection on that component's own
/// statistics and the least-squares fit on the selected support.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub component: usize,
    pub weight: f64,
    pub lasso_lambda: f64,
    /// `None` when no threshold meets the target FDR.
    pub knockoff_threshold: Option<f64>,
    pub support: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: PipelineConfig,
    pub data: DataSummary,
    pub kernel: KernelSummary,
    pub kpca: SignalBundle,
    pub knockoff: KnockoffSummary,
    pub pvalue_method: PValueMethod,
    pub selection: SelectionSummary,
    pub features: Vec<FeatureRecord>,
    pub components: Vec<ComponentReport>,
    /// Wall-clock timings; left out unless explicitly requested because they
    /// would break byte-for-byte reproducibility.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<StageTiming>>,
}

impl SelectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// Everything produced along the way, for side outputs.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: SelectionReport,
    pub data: Dataset,
    pub features: FeatureMatrix,
    pub term_names: Vec<String>,
    pub signals: SignalBundle,
    pub weko: WekoScores,
    pub pvalues: PValueVector,
    pub timings: Vec<StageTiming>,
}

pub fn run_pipeline(config: &PipelineConfig, data: &Dataset) -> Result<SelectionReport> {
    run_pipeline_detailed(config, data).map(|out| out.report)
}

/// Computes the kernel signals for a dataset: subsample, standardize, build and
/// center the kernel matrix, and extract the top components.
pub fn signals_for(config: &PipelineConfig, data: &Dataset) -> Result<(Dataset, Vec<String>, SignalBundle)> {
    config.validate()?;
    let sub = subsample(data, config.max_rows, config.seed).stage(Stage::Load)?;
    let (x, params) = standardize(&sub).stage(Stage::Standardize)?;
    let k = kernel_matrix(&config.kernel_spec(), &x).stage(Stage::Kernel)?;
    let bundle = s4gen(&center(&k), config.num_components).stage(Stage::Kpca)?;
    Ok((x, params.dropped, bundle))
}

pub fn run_pipeline_detailed(config: &PipelineConfig, data: &Dataset) -> Result<PipelineOutput> {
    config.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: Stage, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming {
            stage: stage.name(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        clock = Instant::now();
    };

    let sub = subsample(data, config.max_rows, config.seed).stage(Stage::Load)?;
    let (x, params) = standardize(&sub).stage(Stage::Standardize)?;
    lap(Stage::Standardize, &mut timings);

    let spec = config.kernel_spec();
    let k = kernel_matrix(&spec, &x).stage(Stage::Kernel)?;
    let kc = center(&k);
    lap(Stage::Kernel, &mut timings);

    let signals = s4gen(&kc, config.num_components).stage(Stage::Kpca)?;
    drop((k, kc));
    lap(Stage::Kpca, &mut timings);

    let basis = build_basis(x.p());
    let features = expand(&basis, &x).stage(Stage::Expand)?;
    let names = term_names(&basis, x.column_names());
    lap(Stage::Expand, &mut timings);

    let scores = weko(&features, &signals, &config.weko_options(), config.seed).stage(Stage::Knockoff)?;
    lap(Stage::Knockoff, &mut timings);

    let pvalues = match config.pvalue_method {
        PValueMethod::Percentile => pvalues_percentile_active(&scores.scores, &features.active),
        PValueMethod::Lognormal => pvalues_lognormal(&scores.scores).stage(Stage::PValues)?,
    };
    lap(Stage::PValues, &mut timings);

    let s = &scores.scores;
    let selection = match config.selection {
        SelectionStrategy::Threshold { alpha } => select_threshold(&pvalues, s, alpha),
        SelectionStrategy::Bh { alpha } => select_bh(&pvalues, s, alpha),
        SelectionStrategy::Fixed { r } => select_fixed(&pvalues, s, r),
        SelectionStrategy::Auto => select_varying(
            &pvalues,
            s,
            &features,
            &signals,
            &config.varying_options(features.d()),
        ),
    }
    .stage(Stage::Select)?;
    lap(Stage::Select, &mut timings);

    let mut components = Vec::with_capacity(signals.m_eff);
    for st in &scores.stats {
        let j = st.signal_index;
        let tau = knockoff_threshold(&st.w, config.fdr_q);
        let support: Vec<usize> = (0..st.w.len()).filter(|&d| st.w[d] >= tau).collect();
        let rmse = if config.component_fits {
            // the constant column alone gives the mean-only baseline
            let fit_support = if support.is_empty() { vec![0] } else { support.clone() };
            let fit = fit_component(&features.psi, &signals.signal(j), &fit_support, j)
                .stage(Stage::ComponentFit)?;
            Some(fit.rmse)
        } else {
            None
        };
        components.push(ComponentReport {
            component: j,
            weight: signals.lambdas[j],
            lasso_lambda: st.lambda_used,
            knockoff_threshold: tau.is_finite().then_some(tau),
            support: support.iter().map(|&d| names[d].clone()).collect(),
            rmse,
        });
    }
    lap(Stage::ComponentFit, &mut timings);

    let mut selected_flag = vec![false; features.d()];
    for &d in &selection.selected {
        selected_flag[d] = true;
    }
    let records = (0..features.d())
        .map(|d| FeatureRecord {
            index: d,
            name: names[d].clone(),
            term: basis.terms()[d].label(),
            score: s[d],
            p_value: pvalues.values[d],
            selected: selected_flag[d],
        })
        .collect();

    let report = SelectionReport {
        schema_version: SCHEMA_VERSION,
        tool: "spofe",
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        config: config.clone(),
        data: DataSummary {
            rows_input: data.n(),
            rows_used: x.n(),
            columns: x.column_names().to_vec(),
            dropped_columns: params.dropped.clone(),
        },
        kernel: KernelSummary {
            kind: spec.kind,
            gamma: spec.gamma.resolve(x.p()),
            coef0: (spec.kind == KernelKind::Sigmoid).then_some(spec.coef0),
            rff_dim: (spec.kind == KernelKind::RffRbf).then_some(spec.rff_dim),
        },
        kpca: signals.clone(),
        knockoff: KnockoffSummary {
            shrinkage: scores.model.shrinkage,
            lambda_min: scores.model.lambda_min,
            s: scores.model.s[0],
            active_features: scores.model.active_idx.len(),
        },
        pvalue_method: config.pvalue_method,
        selection: SelectionSummary {
            selected_names: selection.selected.iter().map(|&d| names[d].clone()).collect(),
            result: selection,
        },
        features: records,
        components,
        timings: None,
    };

    Ok(PipelineOutput {
        report,
        data: x,
        features,
        term_names: names,
        signals,
        weko: scores,
        pvalues,
        timings,
    })
}
