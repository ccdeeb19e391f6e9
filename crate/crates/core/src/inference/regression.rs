//! Ridge and least-squares fits used for validation and component reports.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::spd_solve;

/// Solves `(AᵀA + n·α·I) β = Aᵀy`.
pub fn ridge_fit(a: &DMatrix<f64>, y: &[f64], alpha_reg: f64) -> Result<DVector<f64>> {
    let (n, k) = a.shape();
    if k == 0 {
        return Err(Error::InvalidInput("ridge regression needs at least one column".into()));
    }
    if y.len() != n {
        return Err(Error::InvalidInput(format!("design has {n} rows, target has {}", y.len())));
    }
    if !(alpha_reg >= 0.0) {
        return Err(Error::InvalidInput(format!("ridge penalty must be ≥ 0, got {alpha_reg}")));
    }
    let mut gram = a.tr_mul(a);
    for i in 0..k {
        gram[(i, i)] += n as f64 * alpha_reg;
    }
    let rhs = a.tr_mul(&DVector::from_column_slice(y));
    spd_solve(&gram, &rhs)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentFit {
    pub component: usize,
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub rmse: f64,
}

/// Near-OLS (ridge `1e-8`) fit of one signal on a subset of Ψ's columns.
pub fn fit_component(psi: &DMatrix<f64>, z: &[f64], support: &[usize], component: usize) -> Result<ComponentFit> {
    if support.is_empty() {
        return Err(Error::InvalidInput("component fit needs a nonempty support".into()));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= psi.ncols()) {
        return Err(Error::Bounds {
            index: bad,
            len: psi.ncols(),
        });
    }
    let a = psi.select_columns(support);
    let beta = ridge_fit(&a, z, 1e-8)?;
    let fitted = &a * &beta;
    let mse = z
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f) * (y - f))
        .sum::<f64>()
        / z.len() as f64;
    Ok(ComponentFit {
        component,
        support: support.to_vec(),
        coefficients: beta.iter().copied().collect(),
        rmse: mse.sqrt(),
    })
}
