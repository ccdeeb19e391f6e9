//! Monte-Carlo harness for the knockoff filter on synthetic sparse signals.
//!
//! Each repeat draws a standard normal design, expands it, plants `k_true`
//! polynomial terms in a synthetic signal and runs one knockoff selection.
//! It records the false discovery proportion, the power and the rmse of a
//! least-squares fit on the selected support against the fit on the true one.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use nalgebra::DMatrix;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::inference::fit_component;
use crate::knockoff::{knockoff_select, knockoff_stats_lcd, KnockoffModel, LambdaRule, LassoSettings};
use crate::linalg::mean_std;
use crate::polybasis::{build_basis, d_max, expand};
use crate::rng::{substream, SIM};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub k_true: usize,
    pub coef: f64,
    /// `f64::INFINITY` makes every signal pure noise.
    pub noise_std: f64,
    pub q: f64,
    pub repeats: usize,
    pub seed: u64,
    pub shrinkage: f64,
    pub lambda_rule: LambdaRule,
    pub lasso: LassoSettings,
}

impl SimulationSpec {
    pub fn new(n: usize, p: usize, k_true: usize, q: f64, repeats: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            k_true,
            coef: 1.0,
            noise_std: 1.0,
            q,
            repeats,
            seed,
            shrinkage: 0.05,
            lambda_rule: LambdaRule::default(),
            lasso: LassoSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n < 3 {
            return Err(Error::Config("simulation needs p >= 1 and n >= 3".into()));
        }
        if self.k_true > d_max(self.p) - 1 {
            return Err(Error::Config(format!(
                "k_true = {} exceeds the {} non-constant terms",
                self.k_true,
                d_max(self.p) - 1
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("simulation needs at least one repeat".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.coef.is_finite() && self.noise_std >= 0.0 && !self.noise_std.is_nan()) {
            return Err(Error::Config("coef must be finite and noise_std nonnegative".into()));
        }
        if self.coef == 0.0 && self.noise_std == 0.0 || self.k_true == 0 && self.noise_std == 0.0 {
            return Err(Error::Config("signal would be constant".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub true_support: Vec<usize>,
    pub selected: Vec<usize>,
    pub fdp: f64,
    /// `None` when there is nothing to find.
    pub power: Option<f64>,
    pub rmse_selected: f64,
    pub rmse_oracle: f64,
}

impl RepeatOutcome {
    pub fn rmse_gap(&self) -> f64 {
        self.rmse_selected - self.rmse_oracle
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub spec: SimulationSpec,
    pub mean_fdp: f64,
    pub se_fdp: f64,
    pub mean_power: Option<f64>,
    pub se_power: Option<f64>,
    pub mean_rmse_gap: f64,
    pub se_rmse_gap: f64,
    /// Fraction of repeats selecting each term, indexed by basis position.
    pub selection_frequency: Vec<f64>,
    pub repeats: Vec<RepeatOutcome>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let (m, sd) = mean_std(v.iter().copied());
    let k = v.len() as f64;
    // population std rescaled to the sample one
    let se = if v.len() > 1 { sd * (k / (k - 1.0)).sqrt() / k.sqrt() } else { 0.0 };
    (m, se)
}

pub fn simulate_repeat(spec: &SimulationSpec, repeat: usize) -> Result<RepeatOutcome> {
    let mut rng = substream(spec.seed, SIM, repeat as u64);
    let x = DMatrix::from_fn(spec.n, spec.p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let basis = build_basis(spec.p);
    let fm = expand(&basis, &Dataset::from_matrix(x)?)?;
    let candidates = fm.active_indices();
    if candidates.len() < spec.k_true {
        return Err(Error::DegenerateInput("too few non-constant terms for the planted support".into()));
    }
    let mut support: Vec<usize> = index::sample(&mut rng, candidates.len(), spec.k_true)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    support.sort_unstable();
    let signs: Vec<f64> = support
        .iter()
        .map(|_| if rng.random::<bool>() { spec.coef } else { -spec.coef })
        .collect();
    let noise: Vec<f64> = (0..spec.n).map(|_| rng.sample(StandardNormal)).collect();
    let knockoff_seed: u64 = rng.random();

    let pure_noise = spec.noise_std.is_infinite();
    let mut z: Vec<f64> = (0..spec.n)
        .map(|i| {
            if pure_noise {
                return noise[i];
            }
            let mut v = spec.noise_std * noise[i];
            for (&d, &b) in support.iter().zip(&signs) {
                v += b * fm.psi[(i, d)];
            }
            v
        })
        .collect();
    let (mu, sd) = mean_std(z.iter().copied());
    if !(sd > 0.0) {
        return Err(Error::DegenerateInput("synthetic signal has zero variance".into()));
    }
    for v in &mut z {
        *v = (*v - mu) / sd;
    }

    let model = KnockoffModel::fit(&fm.psi, &fm.active, spec.shrinkage)?;
    let tilde = model.sample(&fm.psi, knockoff_seed)?;
    let stats = knockoff_stats_lcd(&fm.psi, &tilde, &fm.active, &z, 0, &spec.lambda_rule, &spec.lasso)?;
    let selected = knockoff_select(&stats.w, spec.q);

    let planted = if pure_noise { Vec::new() } else { support.clone() };
    let hits = selected.iter().filter(|d| planted.binary_search(d).is_ok()).count();
    let fdp = (selected.len() - hits) as f64 / selected.len().max(1) as f64;
    let power = (!planted.is_empty()).then(|| hits as f64 / planted.len() as f64);

    // both fits carry the constant column so the empty selection is the mean model
    let with_const = |s: &[usize]| {
        let mut v = vec![0];
        v.extend_from_slice(s);
        v
    };
    let rmse_selected = fit_component(&fm.psi, &z, &with_const(&selected), 0)?.rmse;
    let rmse_oracle = fit_component(&fm.psi, &z, &with_const(&planted), 0)?.rmse;

    Ok(RepeatOutcome {
        repeat,
        true_support: planted,
        selected,
        fdp,
        power,
        rmse_selected,
        rmse_oracle,
    })
}

/// Runs all repeats in parallel; results do not depend on scheduling.
pub fn simulate_fdr(spec: &SimulationSpec) -> Result<SimulationSummary> {
    spec.validate()?;
    let repeats = (0..spec.repeats)
        .into_par_iter()
        .map(|r| simulate_repeat(spec, r))
        .collect::<Result<Vec<_>>>()?;

    let fdp: Vec<f64> = repeats.iter().map(|r| r.fdp).collect();
    let power: Vec<f64> = repeats.iter().filter_map(|r| r.power).collect();
    let gap: Vec<f64> = repeats.iter().map(RepeatOutcome::rmse_gap).collect();
    let (mean_fdp, se_fdp) = mean_se(&fdp);
    let (mean_gap, se_gap) = mean_se(&gap);
    let (mean_power, se_power) = if power.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_se(&power);
        (Some(m), Some(s))
    };
    let mut freq = vec![0.0; d_max(spec.p)];
    for r in &repeats {
        for &d in &r.selected {
            freq[d] += 1.0 / spec.repeats as f64;
        }
    }
    Ok(SimulationSummary {
        spec: spec.clone(),
        mean_fdp,
        se_fdp,
        mean_power,
        se_power,
        mean_rmse_gap: mean_gap,
        se_rmse_gap: se_gap,
        selection_frequency: freq,
        repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeats_are_reproducible() {
        let spec = SimulationSpec::new(200, 4, 3, 0.2, 2, 9);
        let a = simulate_repeat(&spec, 1).unwrap();
        let b = simulate_repeat(&spec, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.true_support.len(), 3);
        assert!(a.true_support.iter().all(|&d| d != 0));
    }

    #[test]
    fn zero_coefficient_finds_nothing() {
        let mut spec = SimulationSpec::new(300, 3, 2, 0.2, 10, 1);
        spec.coef = 0.0;
        let s = simulate_fdr(&spec).unwrap();
        assert!(s.mean_power.unwrap() <= 0.2);
    }

    #[test]
    fn pure_noise_has_no_power_to_measure() {
        let mut spec = SimulationSpec::new(200, 3, 2, 0.2, 3, 1);
        spec.noise_std = f64::INFINITY;
        let s = simulate_fdr(&spec).unwrap();
        assert!(s.mean_power.is_none());
        assert!(s.repeats.iter().all(|r| r.true_support.is_empty()));
    }

    #[test]
    fn rejects_oversized_support() {
        let spec = SimulationSpec::new(100, 2, 6, 0.2, 1, 0);
        assert!(matches!(simulate_fdr(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn frequencies_are_fractions() {
        let spec = SimulationSpec::new(300, 3, 2, 0.2, 4, 3);
        let s = simulate_fdr(&spec).unwrap();
        assert!(s.selection_frequency.iter().all(|&f| (0.0..=1.0 + 1e-12).contains(&f)));
        assert_eq!(s.selection_frequency[0], 0.0);
    }
}
