//! Kernel functions, dense kernel matrices, double centering and a random
//! Fourier feature map for the RBF kernel.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Cosine,
    Rbf,
    Sigmoid,
    /// RBF approximated through random Fourier features.
    #[serde(rename = "rff")]
    RffRbf,
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(KernelKind::Cosine),
            "rbf" => Ok(KernelKind::Rbf),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            "rff" | "rffrbf" | "rff-rbf" => Ok(KernelKind::RffRbf),
            other => Err(Error::Config(format!("unknown kernel {other:?}"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Cosine => "cosine",
            KernelKind::Rbf => "rbf",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::RffRbf => "rff",
        })
    }
}

/// Bandwidth parameter. `Auto` resolves to `1/p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, p: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / p.max(1) as f64,
            Gamma::Value(g) => g,
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Gamma::Auto);
        }
        let g: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("gamma must be a number or \"auto\", got {s:?}")))?;
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {g}")));
        }
        Ok(Gamma::Value(g))
    }
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Auto => s.serialize_str("auto"),
            Gamma::Value(g) => s.serialize_f64(*g),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(g) if g > 0.0 && g.is_finite() => Ok(Gamma::Value(g)),
            Repr::Num(g) => Err(serde::de::Error::custom(format!("gamma must be positive, got {g}"))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: Gamma,
    /// Sigmoid offset.
    pub coef0: f64,
    /// Number of random features for [`KernelKind::RffRbf`].
    pub rff_dim: usize,
    pub rff_seed: u64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            gamma: Gamma::Auto,
            coef0: 1.0,
            rff_dim: 2000,
            rff_seed: 0,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelSpec {
            gamma: Gamma::Value(gamma),
            ..KernelSpec::new(KernelKind::Rbf)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if !self.coef0.is_finite() {
            return Err(Error::Config("coef0 must be finite".into()));
        }
        if self.kind == KernelKind::RffRbf && self.rff_dim == 0 {
            return Err(Error::Config("rff_dim must be at least 1".into()));
        }
        Ok(())
    }
}

/// Square kernel matrix; `centered` records whether [`center`] produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub centered: bool,
}

impl KernelMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        KernelMatrix {
            values,
            centered: false,
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Random Fourier feature map `z(x) = √(2/D)·cos(Ωx + b)` whose inner
/// products approximate `exp(−γ‖x−y‖²)`.
#[derive(Debug, Clone)]
pub struct RffMap {
    /// `D × p` frequencies, i.i.d. `N(0, 2γ)`.
    omega: DMatrix<f64>,
    offsets: Vec<f64>,
    scale: f64,
}

impl RffMap {
    pub fn new(p: usize, gamma: f64, dim: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, rng::RFF);
        let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("gamma is positive");
        // row-major draw order: frequency k, then coordinate
        let mut omega = DMatrix::zeros(dim, p);
        for k in 0..dim {
            for j in 0..p {
                omega[(k, j)] = normal.sample(&mut rng);
            }
        }
        let offsets = (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        RffMap {
            omega,
            offsets,
            scale: (2.0 / dim as f64).sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let wx: f64 = self.omega.row(k).iter().zip(x).map(|(w, v)| w * v).sum();
                self.scale * (wx + self.offsets[k]).cos()
            })
            .collect()
    }

    fn for_spec(spec: &KernelSpec, p: usize) -> Self {
        RffMap::new(p, spec.gamma.resolve(p), spec.rff_dim, spec.rff_seed)
    }
}

pub fn kernel_value(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let gamma = spec.gamma.resolve(x.len());
    match spec.kind {
        KernelKind::Cosine => {
            let (nx, ny) = (dot(x, x).sqrt(), dot(y, y).sqrt());
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::DegenerateInput(
                    "cosine kernel is undefined for a zero vector".into(),
                ));
            }
            Ok((dot(x, y) / (nx * ny)).clamp(-1.0, 1.0))
        }
        KernelKind::Rbf => Ok((-gamma * sq_dist(x, y)).exp()),
        KernelKind::Sigmoid => Ok((gamma * dot(x, y) + spec.coef0).tanh()),
        KernelKind::RffRbf => {
            let map = RffMap::for_spec(spec, x.len());
            Ok(dot(&map.features(x), &map.features(y)))
        }
    }
}

/// `n × D` random Fourier feature matrix of the dataset rows.
pub fn rff_features(spec: &KernelSpec, d: &Dataset) -> Result<DMatrix<f64>> {
    if spec.kind != KernelKind::RffRbf {
        return Err(Error::InvalidInput(format!(
            "random Fourier features need the rff kernel, got {}",
            spec.kind
        )));
    }
    spec.validate()?;
    let map = RffMap::for_spec(spec, d.p());
    let rows: Vec<Vec<f64>> = d.rows().par_iter().map(|x| map.features(x)).collect();
    Ok(DMatrix::from_fn(d.n(), map.dim(), |i, k| rows[i][k]))
}

/// Dense kernel matrix over the dataset rows. The upper triangle is computed
/// and mirrored, so the result equals its transpose exactly.
pub fn kernel_matrix(spec: &KernelSpec, d: &Dataset) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = d.n();
    let rows: Vec<Vec<f64>> = match spec.kind {
        KernelKind::RffRbf => {
            let z = rff_features(spec, d)?;
            (0..n).map(|i| z.row(i).iter().copied().collect()).collect()
        }
        _ => d.rows(),
    };
    let gamma = spec.gamma.resolve(d.p());

    let norms: Vec<f64> = rows.iter().map(|r| dot(r, r).sqrt()).collect();
    if spec.kind == KernelKind::Cosine {
        if let Some(i) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::DegenerateInput(format!(
                "cosine kernel is undefined for all-zero row {}",
                i + 1
            )));
        }
    }

    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &rows[i];
            (i..n)
                .map(|j| {
                    let xj = &rows[j];
                    match spec.kind {
                        KernelKind::Cosine if i == j => 1.0,
                        KernelKind::Cosine => (dot(xi, xj) / (norms[i] * norms[j])).clamp(-1.0, 1.0),
                        KernelKind::Rbf => (-gamma * sq_dist(xi, xj)).exp(),
                        KernelKind::Sigmoid => (gamma * dot(xi, xj) + spec.coef0).tanh(),
                        KernelKind::RffRbf => dot(xi, xj),
                    }
                })
                .collect()
        })
        .collect();

    let mut k = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(KernelMatrix::new(k))
}

/// Double centering `K − 1ₙK − K1ₙ + 1ₙK1ₙ` with `1ₙ = 𝟙𝟙ᵀ/n`.
///
/// Idempotent up to rounding, so applying it to an already centered matrix is
/// harmless.
pub fn center(k: &KernelMatrix) -> KernelMatrix {
    let n = k.n();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.values.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.values.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k.values[(i, j)] - row_means[i] - col_means[j] + grand;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    KernelMatrix {
        values: out,
        centered: true,
    }
}
