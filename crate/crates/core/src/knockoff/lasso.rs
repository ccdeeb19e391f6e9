//! Cyclic coordinate descent for `(1/2n)‖y − Aβ‖² + λ‖β‖₁`.

use nalgebra::DMatrix;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LassoSettings {
    /// KKT tolerance on the scaled gradient `A_jᵀ(y − Aβ)/n`.
    pub tol: f64,
    /// Cap on full sweeps over all coordinates.
    pub max_iter: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[inline]
fn col(a: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = a.nrows();
    &a.as_slice()[j * n..(j + 1) * n]
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn residual(a: &DMatrix<f64>, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut r = y.to_vec();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (ri, aij) in r.iter_mut().zip(col(a, j)) {
                *ri -= aij * b;
            }
        }
    }
    r
}

/// Largest violation of the lasso optimality conditions at `beta`.
pub fn kkt_violation(a: &DMatrix<f64>, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = a.nrows() as f64;
    let r = residual(a, y, beta);
    (0..a.ncols())
        .map(|j| {
            let g = dot(col(a, j), &r) / n;
            if beta[j] > 0.0 {
                (g - lambda).abs()
            } else if beta[j] < 0.0 {
                (g + lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Smallest `λ` at which the all-zero solution is optimal.
pub fn lambda_max(a: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = a.nrows() as f64;
    (0..a.ncols())
        .map(|j| (dot(col(a, j), y) / n).abs())
        .fold(0.0, f64::max)
}

pub fn lasso_cd(a: &DMatrix<f64>, y: &[f64], lambda: f64, settings: &LassoSettings) -> Result<Vec<f64>> {
    lasso_cd_warm(a, y, lambda, settings, vec![0.0; a.ncols()])
}

/// Coordinate descent from a warm start. Full sweeps alternate with sweeps
/// restricted to the current support; the loop exits once the KKT conditions
/// hold to `settings.tol` on a freshly recomputed residual.
pub fn lasso_cd_warm(
    a: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    settings: &LassoSettings,
    mut beta: Vec<f64>,
) -> Result<Vec<f64>> {
    let (n, k) = a.shape();
    if y.len() != n || beta.len() != k {
        return Err(Error::InvalidInput(format!(
            "lasso shapes disagree: A is {n}x{k}, y has {}, β has {}",
            y.len(),
            beta.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lasso penalty must be ≥ 0, got {lambda}")));
    }
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..k).map(|j| dot(col(a, j), col(a, j)) / nf).collect();
    let mut r = residual(a, y, &beta);

    let update = |j: usize, beta: &mut [f64], r: &mut [f64]| -> f64 {
        if col_sq[j] == 0.0 {
            beta[j] = 0.0;
            return 0.0;
        }
        let aj = col(a, j);
        let old = beta[j];
        let g = dot(aj, r) / nf + col_sq[j] * old;
        let new = soft_threshold(g, lambda) / col_sq[j];
        let delta = new - old;
        if delta != 0.0 {
            for (ri, aij) in r.iter_mut().zip(aj) {
                *ri -= aij * delta;
            }
            beta[j] = new;
        }
        delta.abs() * col_sq[j].sqrt()
    };

    let mut violation = f64::INFINITY;
    for iter in 0..settings.max_iter {
        for j in 0..k {
            update(j, &mut beta, &mut r);
        }
        let support: Vec<usize> = (0..k).filter(|&j| beta[j] != 0.0).collect();
        for _ in 0..1000 {
            let mut change = 0.0_f64;
            for &j in &support {
                change = change.max(update(j, &mut beta, &mut r));
            }
            if change <= settings.tol * 1e-2 {
                break;
            }
        }
        r = residual(a, y, &beta);
        violation = kkt_violation(a, y, &beta, lambda);
        if violation <= settings.tol {
            return Ok(beta);
        }
        if iter + 1 == settings.max_iter {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iter,
        kkt_violation: violation,
        best: beta,
    })
}
