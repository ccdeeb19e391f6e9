//! Calibration of weighted scores into p-values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Percentile,
    Lognormal,
}

impl FromStr for PValueMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "percentile" => Ok(PValueMethod::Percentile),
            "lognormal" | "log-normal" => Ok(PValueMethod::Lognormal),
            other => Err(Error::Config(format!("unknown p-value method {other:?}"))),
        }
    }
}

impl fmt::Display for PValueMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PValueMethod::Percentile => "percentile",
            PValueMethod::Lognormal => "lognormal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueVector {
    pub values: Vec<f64>,
    pub method: PValueMethod,
}

impl PValueVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Rank-from-top p-values: `p_d = #{d′ : s_{d′} ≥ s_d} / d`. Tied scores share
/// the largest rank of their group.
pub fn pvalues_percentile(scores: &[f64]) -> PValueVector {
    let active = vec![true; scores.len()];
    pvalues_percentile_active(scores, &active)
}

/// Percentile p-values where only `active` entries are ranked; inactive entries
/// get `p = 1`. The denominator is still the full length.
pub fn pvalues_percentile_active(scores: &[f64], active: &[bool]) -> PValueVector {
    let dm = scores.len() as f64;
    let mut sorted: Vec<f64> = scores
        .iter()
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(&s, _)| s)
        .collect();
    sorted.sort_by(f64::total_cmp);
    let values = scores
        .iter()
        .zip(active)
        .map(|(&s, &a)| {
            if !a {
                return 1.0;
            }
            let below = sorted.partition_point(|&v| v < s);
            (sorted.len() - below) as f64 / dm
        })
        .collect();
    PValueVector {
        values,
        method: PValueMethod::Percentile,
    }
}

/// Upper tail of a log-normal fitted to the strictly positive scores.
///
/// `μ̂` and `σ̂²` are the mean and unbiased variance of `ln s` over positive
/// scores; non-positive scores get `p = 1`.
pub fn pvalues_lognormal(scores: &[f64]) -> Result<PValueVector> {
    let logs: Vec<f64> = scores.iter().filter(|&&s| s > 0.0).map(|s| s.ln()).collect();
    if logs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "log-normal fit needs at least 3 positive scores, got {}",
            logs.len()
        )));
    }
    let k = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / k;
    let var = logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / (k - 1.0);
    if !(var > 1e-24 * mu.abs().max(1.0)) {
        return Err(Error::DegenerateDistribution(
            "log-scores have zero variance".into(),
        ));
    }
    let sigma = var.sqrt();
    let values = scores
        .iter()
        .map(|&s| {
            if s > 0.0 {
                let z = (s.ln() - mu) / sigma;
                // 1 − Φ(z)
                (0.5 * erfc(z / std::f64::consts::SQRT_2)).clamp(f64::MIN_POSITIVE, 1.0)
            } else {
                1.0
            }
        })
        .collect();
    Ok(PValueVector {
        values,
        method: PValueMethod::Lognormal,
    })
}
