//! Second-order Gaussian model-X knockoffs with the equicorrelated gap rule.
//!
//! With the (shrunk) correlation matrix `Σ` and `S = diag(s)`, a knockoff row is
//! drawn from `N(x − xΣ⁻¹S, 2S − SΣ⁻¹S)` on the standardized scale, so that the
//! pair `[X, X̃]` has covariance `[[Σ, Σ−S], [Σ−S, Σ]]`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{psd_cholesky, symmetric_eigen};
use crate::polybasis::FeatureMatrix;
use crate::rng;

/// Smallest eigenvalue the shrunk correlation matrix may have.
pub const LAMBDA_MIN_FLOOR: f64 = 1e-6;

/// Fitted knockoff sampler. Vectors and matrices are indexed over the active
/// columns (`active_idx`); inert columns are copied through unchanged.
#[derive(Debug, Clone)]
pub struct KnockoffModel {
    pub active: Vec<bool>,
    pub active_idx: Vec<usize>,
    pub mu: DVector<f64>,
    /// Column standard deviations; `Σ` lives on the correlation scale.
    pub scale: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub s: DVector<f64>,
    /// `I − Σ⁻¹diag(s)`
    pub cond_mean_map: DMatrix<f64>,
    /// Lower-triangular factor of `2diag(s) − diag(s)Σ⁻¹diag(s)`.
    pub cond_cov_factor: DMatrix<f64>,
    pub lambda_min: f64,
    pub shrinkage: f64,
}

impl KnockoffModel {
    /// Fits the model to the columns of `x` flagged in `active`.
    pub fn fit(x: &DMatrix<f64>, active: &[bool], shrinkage: f64) -> Result<Self> {
        let (n, d) = x.shape();
        if active.len() != d {
            return Err(Error::InvalidInput(format!(
                "active mask has {} entries for {d} columns",
                active.len()
            )));
        }
        if !(0.0..1.0).contains(&shrinkage) {
            return Err(Error::Config(format!("shrinkage must lie in [0, 1), got {shrinkage}")));
        }
        let active_idx: Vec<usize> = (0..d).filter(|&j| active[j]).collect();
        let k = active_idx.len();
        if k < 2 {
            return Err(Error::DegenerateInput(format!(
                "knockoffs need at least 2 active columns, got {k}"
            )));
        }
        if n <= 2 {
            return Err(Error::DegenerateInput(format!("knockoffs need more than 2 rows, got {n}")));
        }

        let nf = n as f64;
        let mut xa = DMatrix::from_fn(n, k, |i, c| x[(i, active_idx[c])]);
        let mut mu = DVector::zeros(k);
        let mut scale = DVector::zeros(k);
        for c in 0..k {
            let mut col = xa.column_mut(c);
            let m = col.sum() / nf;
            col.add_scalar_mut(-m);
            let sd = (col.norm_squared() / nf).sqrt();
            if !(sd > 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "active column {} has zero variance",
                    active_idx[c]
                )));
            }
            col /= sd;
            mu[c] = m;
            scale[c] = sd;
        }

        let corr = xa.tr_mul(&xa) / nf;
        let mut sigma = corr * (1.0 - shrinkage) + DMatrix::identity(k, k) * shrinkage;
        for i in 0..k {
            sigma[(i, i)] = 1.0;
            for j in (i + 1)..k {
                let v = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }

        let (eigs, q) = symmetric_eigen(&sigma)?;
        let lambda_min = *eigs.last().expect("k ≥ 2");
        if !(lambda_min >= LAMBDA_MIN_FLOOR) {
            return Err(Error::Numerical(format!(
                "feature correlation matrix is singular (smallest eigenvalue {lambda_min:.3e} \
                 after shrinkage {shrinkage}); increase the covariance shrinkage"
            )));
        }
        let s_val = (2.0 * lambda_min).min(1.0);
        let s = DVector::from_element(k, s_val);

        // Both maps are built in Σ's eigenbasis: the equicorrelated choice makes
        // the conditional covariance exactly singular, and forming it as
        // 2S − S Σ⁻¹ S through an explicit inverse leaves pivots of either sign.
        let spectral = |f: &dyn Fn(f64) -> f64| {
            let mut qd = q.clone();
            for (c, &l) in eigs.iter().enumerate() {
                qd.column_mut(c).scale_mut(f(l));
            }
            let mut m = &qd * q.transpose();
            for i in 0..k {
                for j in (i + 1)..k {
                    let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        };
        let cond_mean_map = spectral(&|l| 1.0 - s_val / l);
        let cond_cov = spectral(&|l| (2.0 * s_val - s_val * s_val / l).max(0.0));
        let cond_cov_factor = psd_cholesky(&cond_cov, 1e-9).map_err(|e| {
            Error::Numerical(format!(
                "knockoff conditional covariance factorization failed ({e}); increase the covariance shrinkage"
            ))
        })?;

        Ok(KnockoffModel {
            active: active.to_vec(),
            active_idx,
            mu,
            scale,
            sigma,
            s,
            cond_mean_map,
            cond_cov_factor,
            lambda_min,
            shrinkage,
        })
    }

    /// Draws one knockoff copy of `x` from the stream `(seed, "knockoff")`.
    pub fn sample(&self, x: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>> {
        let (n, d) = x.shape();
        if d != self.active.len() {
            return Err(Error::InvalidInput(format!(
                "knockoff model fitted on {} columns, matrix has {d}",
                self.active.len()
            )));
        }
        let k = self.active_idx.len();
        let std_x = DMatrix::from_fn(n, k, |i, c| {
            (x[(i, self.active_idx[c])] - self.mu[c]) / self.scale[c]
        });
        let mut rng = rng::stream(seed, rng::KNOCKOFF);
        let mut noise = DMatrix::<f64>::zeros(n, k);
        for i in 0..n {
            for c in 0..k {
                noise[(i, c)] = StandardNormal.sample(&mut rng);
            }
        }
        let tilde_std = &std_x * &self.cond_mean_map + noise * self.cond_cov_factor.transpose();

        let mut out = x.clone();
        for (c, &j) in self.active_idx.iter().enumerate() {
            for i in 0..n {
                out[(i, j)] = self.mu[c] + self.scale[c] * tilde_std[(i, c)];
            }
        }
        Ok(out)
    }
}

pub fn fit_knockoff_model(psi: &FeatureMatrix, shrinkage: f64) -> Result<KnockoffModel> {
    KnockoffModel::fit(&psi.psi, &psi.active, shrinkage)
}

pub fn sample_knockoffs(psi: &FeatureMatrix, model: &KnockoffModel, seed: u64) -> Result<DMatrix<f64>> {
    model.sample(&psi.psi, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_correlation_gives_fresh_normals() {
        // columns orthogonal with unit variance by construction
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let m = KnockoffModel::fit(&x, &[true, true], 0.0).unwrap();
        assert!((&m.sigma - DMatrix::identity(2, 2)).abs().max() < 1e-15);
        assert!(m.s.iter().all(|&v| v == 1.0));
        assert!(m.cond_mean_map.abs().max() < 1e-15);
        assert!((&m.cond_cov_factor - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn perfectly_correlated_pair() {
        let base = gaussian(50, 1, 3);
        let x = DMatrix::from_fn(50, 2, |i, _| base[(i, 0)]);
        assert!(matches!(
            KnockoffModel::fit(&x, &[true, true], 0.0),
            Err(Error::Numerical(_))
        ));
        // eigenvalues of the shrunk matrix are δ and 2 − δ
        let m = KnockoffModel::fit(&x, &[true, true], 0.05).unwrap();
        assert!(m.lambda_min >= 0.05 - 1e-12);
        assert!(m.s.iter().all(|&v| (v - 0.1).abs() < 1e-12));
        let c = &m.cond_cov_factor * m.cond_cov_factor.transpose();
        let expected = DMatrix::identity(2, 2) * 0.2 - crate::linalg::spd_inverse(&m.sigma).unwrap() * 0.01;
        assert!((c - expected).abs().max() < 1e-9);
    }

    #[test]
    fn inert_columns_pass_through() {
        let mut x = gaussian(40, 3, 4);
        x.column_mut(0).fill(1.0);
        let m = KnockoffModel::fit(&x, &[false, true, true], 0.05).unwrap();
        let t = m.sample(&x, 1).unwrap();
        assert_eq!(t.column(0), x.column(0));
        assert_ne!(t.column(1), x.column(1));
        assert!(KnockoffModel::fit(&x, &[false, true, false], 0.05).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let x = gaussian(100, 4, 5);
        let m = KnockoffModel::fit(&x, &[true; 4], 0.05).unwrap();
        assert_eq!(m.sample(&x, 9).unwrap(), m.sample(&x, 9).unwrap());
        assert_ne!(m.sample(&x, 9).unwrap(), m.sample(&x, 10).unwrap());
    }

    #[test]
    fn orthogonal_features_have_uncorrelated_knockoffs() {
        let n = 4000;
        let x = gaussian(n, 3, 6);
        let m = KnockoffModel::fit(&x, &[true; 3], 0.0).unwrap();
        let t = m.sample(&x, 2).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        for j in 0..3 {
            let xc = x.column(j).add_scalar(-x.column(j).mean());
            let tc = t.column(j).add_scalar(-t.column(j).mean());
            let cov = xc.dot(&tc) / n as f64;
            // Σ − diag(s) has zero diagonal
            let target = m.sigma[(j, j)] - m.s[j];
            assert!((cov - target).abs() < bound, "cov {cov} target {target}");
        }
    }
}
