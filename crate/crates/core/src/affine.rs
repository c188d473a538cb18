//! Affine self maps `T(v) = Av + b` on `R^I`.
//!
//! With the componentwise distance `d_i(v, w) = |v_i - w_i|`, such a map is a
//! generalized contraction with coefficient matrix `|A|`. A declared
//! coefficient matrix may be supplied instead, which is how deliberately
//! wrong certificates are expressed in check fixtures.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridFunction;
use crate::ndmatrix::{MatrixError, NonnegativeMatrix};
use crate::perov::{Operator, OperatorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffineError {
    #[error("invalid affine map: {0}")]
    Invalid(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<NonnegativeMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineSpec", into = "AffineSpec")]
pub struct AffineModel {
    spec: AffineSpec,
    a: DMatrix<f64>,
    coefficient: NonnegativeMatrix,
}

impl AffineModel {
    pub fn new(spec: AffineSpec) -> Result<Self, AffineError> {
        let n = spec.a.len();
        if n == 0 {
            return Err(AffineError::Invalid("A must be nonempty".into()));
        }
        if spec.a.iter().any(|r| r.len() != n) || spec.b.len() != n {
            return Err(AffineError::Invalid(format!("A must be {n}x{n} and b of length {n}")));
        }
        if spec.a.iter().flatten().chain(&spec.b).any(|x| !x.is_finite()) {
            return Err(AffineError::Invalid("entries must be finite".into()));
        }
        let a = DMatrix::from_fn(n, n, |i, j| spec.a[i][j]);
        let coefficient = match &spec.coefficient {
            Some(c) if c.dim() != n => {
                return Err(AffineError::Invalid(format!("B must be {n}x{n}")));
            }
            Some(c) => c.clone(),
            None => NonnegativeMatrix::from_fn(n, |i, j| spec.a[i][j].abs())?,
        };
        Ok(Self { spec, a, coefficient })
    }

    /// `T(v) = Bv + b` with the natural coefficient matrix `B`.
    pub fn from_nonnegative(b: &NonnegativeMatrix, offset: Vec<f64>) -> Result<Self, AffineError> {
        Self::new(AffineSpec {
            a: b.to_rows(),
            b: offset,
            coefficient: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.b.len()
    }

    pub fn coefficient_matrix(&self) -> &NonnegativeMatrix {
        &self.coefficient
    }

    pub fn offset(&self) -> &[f64] {
        &self.spec.b
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.a[(i, j)] * v[j]).sum::<f64>() + self.spec.b[i])
            .collect()
    }

    /// `(I - A)^{-1} b` by LU.
    pub fn dense_fixed_point(&self) -> Result<Vec<f64>, AffineError> {
        let n = self.dim();
        let m = DMatrix::<f64>::identity(n, n) - &self.a;
        let x = m
            .lu()
            .solve(&DVector::from_column_slice(&self.spec.b))
            .ok_or(MatrixError::Singular)?;
        Ok(x.iter().copied().collect())
    }
}

impl TryFrom<AffineSpec> for AffineModel {
    type Error = AffineError;

    fn try_from(spec: AffineSpec) -> Result<Self, Self::Error> {
        Self::new(spec)
    }
}

impl From<AffineModel> for AffineSpec {
    fn from(model: AffineModel) -> Self {
        model.spec
    }
}

impl Operator<Vec<f64>> for AffineModel {
    fn apply(&self, v: &Vec<f64>) -> Result<Vec<f64>, OperatorError> {
        if v.len() != self.dim() {
            return Err(OperatorError(format!("expected length {}, got {}", self.dim(), v.len())));
        }
        Ok(AffineModel::apply(self, v))
    }
}

/// Applies the map pointwise across grid columns: `(Tv)_i(k) = sum_j A_ij v_j(k) + b_i`.
impl Operator<GridFunction> for AffineModel {
    fn apply(&self, v: &GridFunction) -> Result<GridFunction, OperatorError> {
        if v.states() != self.dim() {
            return Err(OperatorError(format!("expected {} states, got {}", self.dim(), v.states())));
        }
        let n = self.dim();
        Ok(GridFunction::from_fn(n, v.points(), |i, k| {
            (0..n).map(|j| self.a[(i, j)] * v.get(j, k)).sum::<f64>() + self.spec.b[i]
        }))
    }
}
