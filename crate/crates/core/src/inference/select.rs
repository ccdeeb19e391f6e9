//! Feature selection from p-values: raw threshold, Benjamini–Hochberg,
//! fixed length, and validation-driven varying length.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pvalues::PValueVector;
use crate::error::{Error, Result};
use crate::kpca::SignalBundle;
use crate::linalg::spd_inverse;
use crate::polybasis::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy {
    /// Every feature with `p ≤ alpha`.
    Threshold { alpha: f64 },
    /// Benjamini–Hochberg step-up at level `alpha`.
    Bh { alpha: f64 },
    /// The `r` most significant features.
    Fixed { r: usize },
    /// Length chosen by cross-validated reconstruction of the signals.
    Auto,
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionStrategy::Threshold { alpha } => write!(f, "threshold:{alpha}"),
            SelectionStrategy::Bh { alpha } => write!(f, "bh:{alpha}"),
            SelectionStrategy::Fixed { r } => write!(f, "fixed:{r}"),
            SelectionStrategy::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let alpha = |a: &str| -> Result<f64> {
            match a.parse::<f64>() {
                Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
                _ => Err(Error::Config(format!("selection level must lie in (0, 1), got {a:?}"))),
            }
        };
        match s.split_once(':') {
            None if s == "auto" => Ok(SelectionStrategy::Auto),
            Some(("threshold", a)) => Ok(SelectionStrategy::Threshold { alpha: alpha(a)? }),
            Some(("bh", a)) => Ok(SelectionStrategy::Bh { alpha: alpha(a)? }),
            Some(("fixed", a)) => match a.parse::<usize>() {
                Ok(r) if r >= 1 => Ok(SelectionStrategy::Fixed { r }),
                _ => Err(Error::Config(format!("fixed selection needs a positive count, got {a:?}"))),
            },
            _ => Err(Error::Config(format!(
                "unknown selection {s:?} (expected threshold:<a>, bh:<a>, fixed:<r> or auto)"
            ))),
        }
    }
}

impl Serialize for SelectionStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SelectionStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateScore {
    pub r: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    /// Selected indices in canonical order.
    pub selected: Vec<usize>,
    pub strategy: SelectionStrategy,
    /// p-value cutoff actually applied (threshold and BH).
    pub threshold_used: Option<f64>,
    pub r_used: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateScore>,
}

/// Indices sorted by ascending p, then descending score, then ascending index.
pub fn canonical_order(p: &PValueVector, scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| {
        p.values[a]
            .total_cmp(&p.values[b])
            .then(scores[b].total_cmp(&scores[a]))
            .then(a.cmp(&b))
    });
    idx
}

fn check_lengths(p: &PValueVector, scores: &[f64]) -> Result<()> {
    if p.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} p-values for {} scores",
            p.len(),
            scores.len()
        )));
    }
    Ok(())
}

pub fn select_threshold(p: &PValueVector, scores: &[f64], alpha: f64) -> Result<SelectionResult> {
    check_lengths(p, scores)?;
    let selected = canonical_order(p, scores)
        .into_iter()
        .filter(|&d| p.values[d] <= alpha)
        .collect();
    Ok(SelectionResult {
        selected,
        strategy: SelectionStrategy::Threshold { alpha },
        threshold_used: Some(alpha),
        r_used: None,
        candidates: Vec::new(),
    })
}

/// Benjamini–Hochberg step-up over all p-values.
pub fn select_bh(p: &PValueVector, scores: &[f64], alpha: f64) -> Result<SelectionResult> {
    check_lengths(p, scores)?;
    let m = p.len() as f64;
    let mut sorted = p.values.clone();
    sorted.sort_by(f64::total_cmp);
    let cutoff = (1..=sorted.len())
        .rev()
        .find(|&k| sorted[k - 1] <= k as f64 * alpha / m)
        .map(|k| sorted[k - 1]);
    let selected = match cutoff {
        Some(c) => canonical_order(p, scores)
            .into_iter()
            .filter(|&d| p.values[d] <= c)
            .collect(),
        None => Vec::new(),
    };
    Ok(SelectionResult {
        selected,
        strategy: SelectionStrategy::Bh { alpha },
        threshold_used: cutoff,
        r_used: None,
        candidates: Vec::new(),
    })
}

pub fn select_fixed(p: &PValueVector, scores: &[f64], r: usize) -> Result<SelectionResult> {
    check_lengths(p, scores)?;
    if r == 0 || r > p.len() {
        return Err(Error::Bounds {
            index: r,
            len: p.len(),
        });
    }
    let mut selected = canonical_order(p, scores);
    selected.truncate(r);
    Ok(SelectionResult {
        selected,
        strategy: SelectionStrategy::Fixed { r },
        threshold_used: None,
        r_used: Some(r),
        candidates: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaryingOptions {
    pub candidates: Vec<usize>,
    pub folds: usize,
    pub ridge_alpha: f64,
    pub seed: u64,
}

/// Objectives within this relative (plus absolute) margin of the best one
/// count as ties, which go to the smaller candidate.
const TIE_REL: f64 = 1e-8;
const TIE_ABS: f64 = 1e-10;

/// Λ-weighted mean over signals of the k-fold validation MSE of a ridge fit
/// (with intercept) on the given feature columns.
pub fn cv_objective(
    psi: &DMatrix<f64>,
    bundle: &SignalBundle,
    features: &[usize],
    fold_of: &[usize],
    folds: usize,
    ridge_alpha: f64,
) -> Result<f64> {
    let n = psi.nrows();
    let m = bundle.m_eff;
    let mut mse = vec![0.0; m];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        if train.is_empty() || test.is_empty() {
            continue;
        }
        let a = psi.select_columns(features);
        let mut a_tr = a.select_rows(&train);
        let y_tr = bundle.signals.select_rows(&train);
        let nt = train.len() as f64;
        let a_mean: Vec<f64> = (0..a.ncols()).map(|c| a_tr.column(c).sum() / nt).collect();
        let y_mean: Vec<f64> = (0..m).map(|j| y_tr.column(j).sum() / nt).collect();
        for (c, &mu) in a_mean.iter().enumerate() {
            a_tr.column_mut(c).add_scalar_mut(-mu);
        }
        let mut gram = a_tr.tr_mul(&a_tr);
        for c in 0..a.ncols() {
            gram[(c, c)] += nt * ridge_alpha;
        }
        let inv = spd_inverse(&gram)?;
        let beta = inv * a_tr.tr_mul(&y_tr);
        for &i in &test {
            for j in 0..m {
                let mut pred = y_mean[j];
                for c in 0..a.ncols() {
                    pred += (a[(i, c)] - a_mean[c]) * beta[(c, j)];
                }
                let e = bundle.signals[(i, j)] - pred;
                mse[j] += e * e / n as f64;
            }
        }
    }
    let total: f64 = bundle.lambdas.iter().sum();
    Ok(mse.iter().zip(&bundle.lambdas).map(|(e, l)| e * l).sum::<f64>() / total)
}

/// Picks the candidate length minimizing [`cv_objective`] on the top-`r`
/// features; ties go to the smaller `r`. Folds come from the stream
/// `(seed, "cv")`.
pub fn select_varying(
    p: &PValueVector,
    scores: &[f64],
    fm: &FeatureMatrix,
    bundle: &SignalBundle,
    opts: &VaryingOptions,
) -> Result<SelectionResult> {
    check_lengths(p, scores)?;
    if opts.candidates.is_empty() {
        return Err(Error::Config("varying-length selection needs candidates".into()));
    }
    if opts.folds < 2 || opts.folds > fm.n() {
        return Err(Error::Config(format!(
            "cross-validation needs between 2 and {} folds, got {}",
            fm.n(),
            opts.folds
        )));
    }
    if let Some(&bad) = opts.candidates.iter().find(|&&r| r == 0 || r > p.len()) {
        return Err(Error::Bounds {
            index: bad,
            len: p.len(),
        });
    }
    let mut candidates = opts.candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();

    let order = canonical_order(p, scores);
    let n = fm.n();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::substream(opts.seed, rng::CV, 1));
    let mut fold_of = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % opts.folds;
    }

    let mut scored = Vec::with_capacity(candidates.len());
    for &r in &candidates {
        let objective = cv_objective(&fm.psi, bundle, &order[..r], &fold_of, opts.folds, opts.ridge_alpha)?;
        scored.push(CandidateScore { r, objective });
    }
    let best = scored.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
    let chosen = scored
        .iter()
        .find(|c| c.objective <= best + TIE_ABS + TIE_REL * best.abs())
        .expect("candidates nonempty")
        .r;

    Ok(SelectionResult {
        selected: order[..chosen].to_vec(),
        strategy: SelectionStrategy::Auto,
        threshold_used: None,
        r_used: Some(chosen),
        candidates: scored,
    })
}
