//! Lasso coefficient-difference statistics, the knockoff+ threshold, and the
//! eigenvalue-weighted aggregation across signals.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lasso::{lambda_max, lasso_cd, lasso_cd_warm, LassoSettings};
use super::model::{fit_knockoff_model, sample_knockoffs, KnockoffModel};
use crate::error::{Error, Result};
use crate::kpca::SignalBundle;
use crate::linalg::mean_std;
use crate::polybasis::FeatureMatrix;
use crate::rng;

/// How the lasso penalty for the statistic is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `λ = scale · σ̂_z · √(2 ln(2k) / n)` with `2k` lasso columns.
    Universal { scale: f64 },
    Fixed(f64),
    /// K-fold cross-validation over a log-spaced path; folds drawn from the
    /// stream `(seed, "cv")`.
    CrossValidated { folds: usize, seed: u64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Universal { scale: 0.5 }
    }
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Universal { scale } => write!(f, "universal:{scale}"),
            LambdaRule::Fixed(v) => write!(f, "fixed:{v}"),
            LambdaRule::CrossValidated { folds, .. } => write!(f, "cv:{folds}"),
        }
    }
}

impl Serialize for LambdaRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LambdaRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <String as Deserialize>::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `universal[:scale]`, `fixed:<λ>` or `cv[:folds]`. The CV seed is
/// filled in later from the master seed.
impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, arg) = match s.split_once(':') {
            Some((t, a)) => (t, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| -> Result<f64> {
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::Config(format!("bad lambda rule argument {a:?}")))
        };
        match (tag, arg) {
            ("universal", None) => Ok(LambdaRule::default()),
            ("universal", Some(a)) => Ok(LambdaRule::Universal { scale: num(a)? }),
            ("fixed", Some(a)) => Ok(LambdaRule::Fixed(num(a)?)),
            ("cv", None) => Ok(LambdaRule::CrossValidated { folds: 5, seed: 0 }),
            ("cv", Some(a)) => match a.parse::<usize>() {
                Ok(folds) if folds >= 2 => Ok(LambdaRule::CrossValidated { folds, seed: 0 }),
                _ => Err(Error::Config(format!("cv folds must be an integer ≥ 2, got {a:?}"))),
            },
            _ => Err(Error::Config(format!("unknown lambda rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KnockoffStats {
    /// One entry per feature column; inert columns are 0.
    pub w: Vec<f64>,
    pub lambda_used: f64,
    pub signal_index: usize,
}

fn active_design(psi: &DMatrix<f64>, psi_tilde: &DMatrix<f64>, active: &[bool]) -> (Vec<usize>, DMatrix<f64>) {
    let idx: Vec<usize> = (0..psi.ncols()).filter(|&j| active[j]).collect();
    let k = idx.len();
    let design = DMatrix::from_fn(psi.nrows(), 2 * k, |i, c| {
        if c < k {
            psi[(i, idx[c])]
        } else {
            psi_tilde[(i, idx[c - k])]
        }
    });
    (idx, design)
}

fn cv_lambda(
    design: &DMatrix<f64>,
    z: &[f64],
    folds: usize,
    seed: u64,
    settings: &LassoSettings,
) -> Result<f64> {
    const PATH_LEN: usize = 20;
    let n = design.nrows();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!("cannot run {folds}-fold CV on {n} rows")));
    }
    let top = lambda_max(design, z);
    if top == 0.0 {
        return Ok(0.0);
    }
    let path: Vec<f64> = (0..PATH_LEN)
        .map(|i| top * 1e-3f64.powf(i as f64 / (PATH_LEN - 1) as f64))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::CV));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let mut cv_err = [0.0; PATH_LEN];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let a_tr = design.select_rows(&train);
        let z_tr: Vec<f64> = train.iter().map(|&i| z[i]).collect();
        let mut beta = vec![0.0; design.ncols()];
        for (li, &lam) in path.iter().enumerate() {
            beta = lasso_cd_warm(&a_tr, &z_tr, lam, settings, beta)?;
            let sse: f64 = test
                .iter()
                .map(|&i| {
                    let pred: f64 = (0..design.ncols()).map(|c| design[(i, c)] * beta[c]).sum();
                    (z[i] - pred).powi(2)
                })
                .sum();
            cv_err[li] += sse / n as f64;
        }
    }
    // first minimum along a decreasing path favours the larger penalty on ties
    let mut best = 0;
    for li in 1..PATH_LEN {
        if cv_err[li] < cv_err[best] {
            best = li;
        }
    }
    Ok(path[best])
}

/// Lasso coefficient-difference statistic `W_d = |β_d| − |β̃_d|` from a fit of
/// `z` on the active columns of `[Ψ, Ψ̃]`.
pub fn knockoff_stats_lcd(
    psi: &DMatrix<f64>,
    psi_tilde: &DMatrix<f64>,
    active: &[bool],
    z: &[f64],
    signal_index: usize,
    rule: &LambdaRule,
    settings: &LassoSettings,
) -> Result<KnockoffStats> {
    let (n, d) = psi.shape();
    if psi_tilde.shape() != (n, d) || active.len() != d || z.len() != n {
        return Err(Error::InvalidInput("knockoff statistic inputs disagree in shape".into()));
    }
    let (idx, design) = active_design(psi, psi_tilde, active);
    let k = idx.len();
    let mut w = vec![0.0; d];
    if k == 0 {
        return Ok(KnockoffStats {
            w,
            lambda_used: 0.0,
            signal_index,
        });
    }
    let lambda = match *rule {
        LambdaRule::Universal { scale } => {
            let (_, sd) = mean_std(z.iter().copied());
            scale * sd * (2.0 * ((2 * k) as f64).ln() / n as f64).sqrt()
        }
        LambdaRule::Fixed(v) => v,
        LambdaRule::CrossValidated { folds, seed } => cv_lambda(&design, z, folds, seed, settings)?,
    };
    let beta = lasso_cd(&design, z, lambda, settings)?;
    for (c, &j) in idx.iter().enumerate() {
        w[j] = beta[c].abs() - beta[c + k].abs();
    }
    Ok(KnockoffStats {
        w,
        lambda_used: lambda,
        signal_index,
    })
}

/// Knockoff+ threshold: the smallest nonzero `|W_d|` at which
/// `(1 + #{W ≤ −t}) / max(1, #{W ≥ t}) ≤ q`, or `+∞` if none qualifies.
pub fn knockoff_threshold(w: &[f64], q: f64) -> f64 {
    let mut candidates: Vec<f64> = w.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for t in candidates {
        let neg = w.iter().filter(|&&v| v <= -t).count();
        let pos = w.iter().filter(|&&v| v >= t).count();
        if (1 + neg) as f64 / pos.max(1) as f64 <= q {
            return t;
        }
    }
    f64::INFINITY
}

/// Indices with `W_d ≥ τ`, ascending.
pub fn knockoff_select(w: &[f64], q: f64) -> Vec<usize> {
    let tau = knockoff_threshold(w, q);
    (0..w.len()).filter(|&d| w[d] >= tau).collect()
}

/// `s = Σ_j Λ_j · W^{(j)}`, summed in ascending `j`.
pub fn weighted_scores(per_signal: &DMatrix<f64>, lambdas: &[f64]) -> Vec<f64> {
    assert_eq!(per_signal.ncols(), lambdas.len(), "one weight per signal");
    (0..per_signal.nrows())
        .map(|d| {
            let mut acc = 0.0;
            for (j, &lam) in lambdas.iter().enumerate() {
                acc += lam * per_signal[(d, j)];
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WekoOptions {
    pub shrinkage: f64,
    pub lambda_rule: LambdaRule,
    pub lasso: LassoSettings,
}

impl Default for WekoOptions {
    fn default() -> Self {
        WekoOptions {
            shrinkage: 0.05,
            lambda_rule: LambdaRule::default(),
            lasso: LassoSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WekoScores {
    /// Weighted significance score per feature.
    pub scores: Vec<f64>,
    /// `d × m_eff` matrix of per-signal statistics.
    pub per_signal: DMatrix<f64>,
    pub stats: Vec<KnockoffStats>,
    pub model: KnockoffModel,
    pub knockoffs: DMatrix<f64>,
}

/// Draws one knockoff copy of Ψ, computes statistics for every signal column
/// (in parallel) and combines them with the scaled eigenvalues.
pub fn weko(fm: &FeatureMatrix, bundle: &SignalBundle, opts: &WekoOptions, seed: u64) -> Result<WekoScores> {
    if fm.n() != bundle.signals.nrows() {
        return Err(Error::InvalidInput(format!(
            "feature matrix has {} rows, signals have {}",
            fm.n(),
            bundle.signals.nrows()
        )));
    }
    let model = fit_knockoff_model(fm, opts.shrinkage)?;
    let knockoffs = sample_knockoffs(fm, &model, seed)?;
    let rule = match opts.lambda_rule {
        LambdaRule::CrossValidated { folds, .. } => LambdaRule::CrossValidated { folds, seed },
        r => r,
    };

    let stats: Vec<KnockoffStats> = (0..bundle.m_eff)
        .into_par_iter()
        .map(|j| {
            let z = bundle.signal(j);
            knockoff_stats_lcd(&fm.psi, &knockoffs, &fm.active, &z, j, &rule, &opts.lasso)
        })
        .collect::<Result<_>>()?;

    let mut per_signal = DMatrix::zeros(fm.d(), bundle.m_eff);
    for st in &stats {
        per_signal.set_column(st.signal_index, &nalgebra::DVector::from_column_slice(&st.w));
    }
    let scores = weighted_scores(&per_signal, &bundle.lambdas);
    Ok(WekoScores {
        scores,
        per_signal,
        stats,
        model,
        knockoffs,
    })
}
