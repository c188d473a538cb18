//! Price-dividend ratios in a finite-state Markov asset pricing model.
//!
//! With stochastic discount factor `m_ij` and dividend growth `G_ij` on the
//! transition `i -> j`, the no-arbitrage condition divided by the current
//! dividend reads `v = Bv + B1` with `B = (p_ij m_ij G_ij)`. Ratios are finite
//! exactly when `rho(B) < 1`, in which case `v = (I - B)^{-1} B 1`.
//!
//! When `rho(B) >= 1` the divergence is certified twice: through the left
//! Perron vector `u` of `B` (a finite `v` would give
//! `(1 - rho) u'v = u'B1 > 0`, impossible) and through partial sums of
//! `sum_k B^k 1` that keep growing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ndmatrix::{
    is_irreducible, left_perron_vector, neumann_inverse, spectral_radius, MatrixError,
    NonnegativeMatrix, SpectralCertificate, StochasticMatrix,
};
use crate::perov::{perov_iterate, AbsDiffMetric, ConvergenceReport, PerovError, PerovOptions};

/// Spectral radii within this distance of one are classified divergent and
/// flagged.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Number of partial sums `sum_{k=1}^n B^k 1` inspected for divergence.
pub const DIVERGENCE_HORIZON: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssetError {
    #[error("invalid asset model: {0}")]
    Invalid(String),
    #[error("price-dividend ratios are infinite: rho(B) = {}", .0.rho)]
    Divergent(Box<DivergenceCertificate>),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Perov(#[from] PerovError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetModelSpec {
    #[serde(rename = "P")]
    pub p: StochasticMatrix,
    pub m: NonnegativeMatrix,
    #[serde(rename = "G")]
    pub g: NonnegativeMatrix,
}

/// Irreducible chain with strictly positive discount and growth factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AssetModelSpec", into = "AssetModelSpec")]
pub struct AssetModel {
    p: StochasticMatrix,
    m: NonnegativeMatrix,
    g: NonnegativeMatrix,
}

impl AssetModel {
    pub fn new(p: StochasticMatrix, m: NonnegativeMatrix, g: NonnegativeMatrix) -> Result<Self, AssetError> {
        let n = p.dim();
        for (name, mat) in [("m", &m), ("G", &g)] {
            if mat.dim() != n {
                return Err(AssetError::Invalid(format!("{name} must be {n}x{n}")));
            }
            for i in 0..n {
                for j in 0..n {
                    if !(mat.get(i, j) > 0.0) {
                        return Err(AssetError::Invalid(format!("{name}[{i}][{j}] must be positive")));
                    }
                }
            }
        }
        if !is_irreducible(p.matrix()) {
            return Err(AssetError::Invalid("transition matrix must be irreducible".into()));
        }
        Ok(Self { p, m, g })
    }

    pub fn states(&self) -> usize {
        self.p.dim()
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.p
    }

    pub fn discount(&self) -> &NonnegativeMatrix {
        &self.m
    }

    pub fn growth(&self) -> &NonnegativeMatrix {
        &self.g
    }
}

impl TryFrom<AssetModelSpec> for AssetModel {
    type Error = AssetError;

    fn try_from(spec: AssetModelSpec) -> Result<Self, Self::Error> {
        Self::new(spec.p, spec.m, spec.g)
    }
}

impl From<AssetModel> for AssetModelSpec {
    fn from(model: AssetModel) -> Self {
        Self {
            p: model.p,
            m: model.m,
            g: model.g,
        }
    }
}

/// Price-dividend ratio per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PDVector(pub Vec<f64>);

impl PDVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `B = (p_ij m_ij G_ij)`.
pub fn pricing_matrix(model: &AssetModel) -> NonnegativeMatrix {
    model
        .p
        .matrix()
        .hadamard(&model.m)
        .and_then(|pm| pm.hadamard(&model.g))
        .expect("dimensions checked at construction")
}

/// Evidence that no finite price-dividend ratio exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    pub rho: f64,
    pub spectral: SpectralCertificate,
    /// Left Perron vector of `B`, normalized to sum one.
    pub perron_vector: Vec<f64>,
    pub perron_residual: f64,
    /// `u'B1`, strictly positive.
    pub perron_scalar: f64,
    /// `sum_{k=1}^{horizon} B^k 1`.
    pub partial_sums: Vec<f64>,
    pub horizon: usize,
    /// `rho` lies within [`BOUNDARY_TOL`] of one.
    pub boundary_warning: bool,
}

impl DivergenceCertificate {
    pub fn min_partial_sum(&self) -> f64 {
        self.partial_sums.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Existence {
    Finite { rho: f64, v: PDVector },
    Divergent(Box<DivergenceCertificate>),
}

fn classify(b: &NonnegativeMatrix) -> Result<SpectralCertificate, Box<DivergenceCertificate>> {
    let spectral = spectral_radius(b);
    if spectral.rho < 1.0 - BOUNDARY_TOL {
        return Ok(spectral);
    }
    Err(Box::new(divergence_certificate(b, spectral)))
}

fn divergence_certificate(b: &NonnegativeMatrix, spectral: SpectralCertificate) -> DivergenceCertificate {
    let n = b.dim();
    let ones = vec![1.0; n];
    let b1 = b.mul_vec(&ones);
    // B is irreducible: P is, and m, G are entrywise positive.
    let (perron_vector, perron_residual) = match left_perron_vector(b) {
        Ok(pv) => (pv.u, pv.residual),
        Err(_) => (vec![f64::NAN; n], f64::NAN),
    };
    let perron_scalar = perron_vector.iter().zip(&b1).map(|(u, x)| u * x).sum();
    let mut term = ones;
    let mut partial_sums = vec![0.0; n];
    for _ in 0..DIVERGENCE_HORIZON {
        term = b.mul_vec(&term);
        for (s, t) in partial_sums.iter_mut().zip(&term) {
            *s += t;
        }
    }
    DivergenceCertificate {
        rho: spectral.rho,
        spectral,
        perron_vector,
        perron_residual,
        perron_scalar,
        partial_sums,
        horizon: DIVERGENCE_HORIZON,
        boundary_warning: (spectral.rho - 1.0).abs() <= BOUNDARY_TOL,
    }
}

/// `v = (I - B)^{-1} B 1`.
pub fn pd_ratio_closed_form(model: &AssetModel) -> Result<PDVector, AssetError> {
    let b = pricing_matrix(model);
    classify(&b).map_err(AssetError::Divergent)?;
    let n = b.dim();
    let b1 = b.mul_vec(&vec![1.0; n]);
    let inv = neumann_inverse(&b)?;
    Ok(PDVector(
        (0..n).map(|i| (0..n).map(|j| inv[(i, j)] * b1[j]).sum()).collect(),
    ))
}

/// Iterates `v <- Bv + B1` from `v0` with the componentwise distance.
pub fn pd_ratio_iterative(
    model: &AssetModel,
    v0: Vec<f64>,
    opts: &PerovOptions,
) -> Result<(PDVector, ConvergenceReport), AssetError> {
    let b = pricing_matrix(model);
    classify(&b).map_err(AssetError::Divergent)?;
    let n = b.dim();
    if v0.len() != n {
        return Err(AssetError::Invalid(format!("initial vector must have length {n}")));
    }
    let b1 = b.mul_vec(&vec![1.0; n]);
    let op = |v: &Vec<f64>| {
        let mut out = b.mul_vec(v);
        for (o, c) in out.iter_mut().zip(&b1) {
            *o += c;
        }
        out
    };
    let (v, report) = perov_iterate(&op, v0, &AbsDiffMetric { dim: n }, &b, opts)?;
    Ok((PDVector(v), report))
}

pub fn existence_check(model: &AssetModel) -> Existence {
    let b = pricing_matrix(model);
    match classify(&b) {
        Ok(spectral) => match pd_ratio_closed_form(model) {
            Ok(v) => Existence::Finite { rho: spectral.rho, v },
            // classify admitted the model, so only numerical trouble remains:
            // report it as divergence at the measured radius.
            Err(_) => Existence::Divergent(Box::new(divergence_certificate(&b, spectral))),
        },
        Err(cert) => Existence::Divergent(cert),
    }
}
