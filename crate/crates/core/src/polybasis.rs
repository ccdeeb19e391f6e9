//! Degree-two polynomial basis: constant, linear, square and pairwise cross
//! terms, in a fixed canonical order.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::linalg::mean_std;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "vars", rename_all = "lowercase")]
pub enum PolyTerm {
    Constant,
    Linear(usize),
    Square(usize),
    /// Product of two distinct variables, `i < j`.
    Cross(usize, usize),
}

impl PolyTerm {
    pub fn degree(self) -> u32 {
        match self {
            PolyTerm::Constant => 0,
            PolyTerm::Linear(_) => 1,
            PolyTerm::Square(_) | PolyTerm::Cross(..) => 2,
        }
    }

    /// Exponent multi-index over `p` variables.
    pub fn exponents(self, p: usize) -> Vec<u8> {
        let mut e = vec![0u8; p];
        match self {
            PolyTerm::Constant => {}
            PolyTerm::Linear(i) => e[i] = 1,
            PolyTerm::Square(i) => e[i] = 2,
            PolyTerm::Cross(i, j) => {
                e[i] = 1;
                e[j] = 1;
            }
        }
        e
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            PolyTerm::Constant => 1.0,
            PolyTerm::Linear(i) => x[i],
            PolyTerm::Square(i) => x[i] * x[i],
            PolyTerm::Cross(i, j) => x[i] * x[j],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolyTerm::Constant => "constant",
            PolyTerm::Linear(_) => "linear",
            PolyTerm::Square(_) => "square",
            PolyTerm::Cross(..) => "cross",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    terms: Vec<PolyTerm>,
    p: usize,
}

/// `1 + 2p + p(p−1)/2`
pub fn d_max(p: usize) -> usize {
    1 + 2 * p + p * p.saturating_sub(1) / 2
}

pub fn build_basis(p: usize) -> PolyBasis {
    let mut terms = Vec::with_capacity(d_max(p));
    terms.push(PolyTerm::Constant);
    terms.extend((0..p).map(PolyTerm::Linear));
    terms.extend((0..p).map(PolyTerm::Square));
    for i in 0..p {
        for j in (i + 1)..p {
            terms.push(PolyTerm::Cross(i, j));
        }
    }
    PolyBasis { terms, p }
}

impl PolyBasis {
    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d_max(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, d: usize) -> Result<PolyTerm> {
        self.terms.get(d).copied().ok_or(Error::Bounds {
            index: d,
            len: self.terms.len(),
        })
    }

    /// Raw (unstandardized) `n × d_max` expansion.
    pub fn expand_raw(&self, d: &Dataset) -> Result<DMatrix<f64>> {
        if d.p() != self.p {
            return Err(Error::InvalidInput(format!(
                "basis built for {} variables, dataset has {}",
                self.p,
                d.p()
            )));
        }
        let rows = d.rows();
        Ok(DMatrix::from_fn(d.n(), self.d_max(), |i, k| self.terms[k].eval(&rows[i])))
    }
}

/// Human-readable term name built from the dataset column names.
pub fn term_name(basis: &PolyBasis, d: usize, names: &[String]) -> Result<String> {
    Ok(match basis.term(d)? {
        PolyTerm::Constant => "1".to_string(),
        PolyTerm::Linear(i) => names[i].clone(),
        PolyTerm::Square(i) => format!("{}^2", names[i]),
        PolyTerm::Cross(i, j) => format!("{}*{}", names[i], names[j]),
    })
}

pub fn term_names(basis: &PolyBasis, names: &[String]) -> Vec<String> {
    (0..basis.d_max())
        .map(|d| term_name(basis, d, names).expect("index in range"))
        .collect()
}

/// Expanded and column-standardized feature matrix.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub psi: DMatrix<f64>,
    pub basis: PolyBasis,
    /// Raw column means and population standard deviations.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// `false` for the constant column and for zero-variance columns, which
    /// take no part in knockoff generation.
    pub active: Vec<bool>,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn d(&self) -> usize {
        self.psi.ncols()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.d()).filter(|&k| self.active[k]).collect()
    }
}

/// Expands `d` and standardizes every non-constant column to mean 0 and
/// population std 1. The constant column stays all ones; zero-variance columns
/// are centered to zero and flagged inactive.
pub fn expand(basis: &PolyBasis, d: &Dataset) -> Result<FeatureMatrix> {
    let mut psi = basis.expand_raw(d)?;
    let dm = basis.d_max();
    let mut means = vec![0.0; dm];
    let mut stds = vec![0.0; dm];
    let mut active = vec![false; dm];
    for k in 0..dm {
        let mut col = psi.column_mut(k);
        let (mean, std) = mean_std(col.iter().copied());
        means[k] = mean;
        stds[k] = std;
        if basis.terms[k] == PolyTerm::Constant {
            continue;
        }
        if std <= 1e-12 * mean.abs().max(1.0) {
            col.fill(0.0);
        } else {
            col.apply(|x| *x = (*x - mean) / std);
            active[k] = true;
        }
    }
    Ok(FeatureMatrix {
        psi,
        basis: basis.clone(),
        means,
        stds,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(build_basis(24).d_max(), 325);
        assert_eq!(build_basis(20).d_max(), 231);
        assert_eq!(build_basis(25).d_max(), 351);
        let b = build_basis(1);
        assert_eq!(
            b.terms(),
            [PolyTerm::Constant, PolyTerm::Linear(0), PolyTerm::Square(0)]
        );
        for p in 1..=64 {
            assert_eq!(build_basis(p).d_max(), 1 + 2 * p + p * (p - 1) / 2);
        }
    }

    #[test]
    fn canonical_order() {
        let b = build_basis(3);
        assert_eq!(
            b.terms(),
            [
                PolyTerm::Constant,
                PolyTerm::Linear(0),
                PolyTerm::Linear(1),
                PolyTerm::Linear(2),
                PolyTerm::Square(0),
                PolyTerm::Square(1),
                PolyTerm::Square(2),
                PolyTerm::Cross(0, 1),
                PolyTerm::Cross(0, 2),
                PolyTerm::Cross(1, 2),
            ]
        );
        assert!(b.terms().iter().all(|t| t.degree() <= 2));
        assert_eq!(PolyTerm::Cross(0, 2).exponents(3), vec![1, 0, 1]);
    }

    #[test]
    fn raw_values() {
        let x = [2.0, 3.0];
        assert_eq!(PolyTerm::Cross(0, 1).eval(&x), 6.0);
        assert_eq!(PolyTerm::Square(1).eval(&x), 9.0);
    }

    #[test]
    fn expansion_shape_and_constant_column() {
        let d = Dataset::from_matrix(DMatrix::from_row_slice(
            4,
            2,
            &[0.3, -1.2, 1.1, 0.4, -0.7, 0.9, 0.2, -0.5],
        ))
        .unwrap();
        let fm = expand(&build_basis(2), &d).unwrap();
        assert_eq!(fm.psi.shape(), (4, 6));
        assert!(fm.psi.column(0).iter().all(|&v| v == 1.0));
        assert!(!fm.active[0]);
        for k in 1..6 {
            let (m, s) = mean_std(fm.psi.column(k).iter().copied());
            assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rows_give_zero_raw_values() {
        let d = Dataset::from_matrix(DMatrix::zeros(3, 3)).unwrap();
        let raw = build_basis(3).expand_raw(&d).unwrap();
        assert!(raw.columns(1, 9).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn binary_squares_are_inert() {
        // x ∈ {−1, 1} ⇒ x² ≡ 1
        let d = Dataset::from_matrix(DMatrix::from_row_slice(4, 1, &[-1.0, 1.0, 1.0, -1.0])).unwrap();
        let fm = expand(&build_basis(1), &d).unwrap();
        assert_eq!(fm.active, vec![false, true, false]);
        assert!(fm.psi.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn naming() {
        let b = build_basis(2);
        let n = names(&["range_fie", "wtd_range_ThermalConductivity"]);
        assert_eq!(term_name(&b, 0, &n).unwrap(), "1");
        assert_eq!(term_name(&b, 1, &n).unwrap(), "range_fie");
        assert_eq!(term_name(&b, 4, &n).unwrap(), "wtd_range_ThermalConductivity^2");
        assert_eq!(
            term_name(&b, 5, &n).unwrap(),
            "range_fie*wtd_range_ThermalConductivity"
        );
        assert!(matches!(term_name(&b, 6, &n), Err(Error::Bounds { index: 6, len: 6 })));
        let b1 = build_basis(1);
        assert_eq!(term_name(&b1, 2, &names(&["eta_j4"])).unwrap(), "eta_j4^2");
    }
}
