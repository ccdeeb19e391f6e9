//! Kernel principal components as self-supervised regression targets.
//!
//! The centered kernel matrix is eigendecomposed; each retained eigenpair
//! yields one signal column `Kc·v_j` (standardized) and one weight: the share
//! of the positive spectrum carried by that eigenvalue.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg::{mean_std, symmetric_eigen};

/// Eigenpairs with values sorted descending and orthonormal vector columns.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignalBundle {
    /// `n × m_eff`; column `j` is the standardized score vector `z_j`.
    #[serde(skip)]
    pub signals: DMatrix<f64>,
    /// Scaled eigenvalues: strictly positive, non-increasing, summing to ≤ 1.
    pub lambdas: Vec<f64>,
    /// Raw eigenvalues of the retained components.
    pub eigenvalues: Vec<f64>,
    pub m_requested: usize,
    pub m_eff: usize,
}

impl SignalBundle {
    pub fn signal(&self, j: usize) -> Vec<f64> {
        self.signals.column(j).iter().copied().collect()
    }
}

fn check_square(k: &KernelMatrix) -> Result<()> {
    if k.values.nrows() != k.values.ncols() {
        return Err(Error::InvalidInput("kernel matrix is not square".into()));
    }
    Ok(())
}

/// Top-`m` eigenpairs of a symmetric (centered) kernel matrix. Returns
/// `min(m, n)` pairs.
pub fn eigendecompose(kc: &KernelMatrix, m: usize) -> Result<Eigenpairs> {
    check_square(kc)?;
    let (values, vectors) = symmetric_eigen(&kc.values)?;
    let keep = m.min(values.len());
    Ok(Eigenpairs {
        values: values[..keep].to_vec(),
        vectors: vectors.columns(0, keep).into_owned(),
    })
}

/// Builds the signal matrix and weights from the top `m` kernel components.
///
/// Eigenpairs with `μ ≤ 1e-10·max(μ₁, 1)` are discarded. Weights divide by
/// the sum of all strictly positive eigenvalues, so components beyond `m`
/// still count toward the total.
pub fn s4gen(kc: &KernelMatrix, m: usize) -> Result<SignalBundle> {
    check_square(kc)?;
    if m == 0 {
        return Err(Error::Config("number of components must be positive".into()));
    }
    let (values, vectors) = symmetric_eigen(&kc.values)?;
    let top = values.first().copied().unwrap_or(0.0);
    let eps = 1e-10 * top.max(1.0);
    let positive_total: f64 = values.iter().filter(|&&v| v > 0.0).sum();
    let m_eff = values.iter().take(m).take_while(|&&v| v > eps).count();
    if m_eff == 0 {
        return Err(Error::DegenerateInput(
            "centered kernel matrix has no positive eigenvalues".into(),
        ));
    }

    let v = vectors.columns(0, m_eff);
    let mut signals = &kc.values * v;
    for j in 0..m_eff {
        let mut col = signals.column_mut(j);
        let (mean, std) = mean_std(col.iter().copied());
        if !(std > 0.0) {
            return Err(Error::Numerical(format!("signal {j} has zero variance")));
        }
        col.apply(|x| *x = (*x - mean) / std);
    }
    if signals.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite signal values".into()));
    }

    Ok(SignalBundle {
        signals,
        lambdas: values[..m_eff].iter().map(|&mu| mu / positive_total).collect(),
        eigenvalues: values[..m_eff].to_vec(),
        m_requested: m,
        m_eff,
    })
}
