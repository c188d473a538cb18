//! Model files, result documents and CSV traces.
//!
//! A model file is a JSON object
//!
//! ```json
//! {"schema_version": 1, "kind": "dp", "metadata": {"name": "...", "description": "..."}, "payload": {}}
//! ```
//!
//! whose payload is validated against the model type for `kind` before any
//! computation. Floating-point numbers are written with 17 significant
//! digits so every value round-trips exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::affine::AffineModel;
use crate::asset_pricing::AssetModel;
use crate::grid::GridFunction;
use crate::markov_dp::{DPModel, Policy};
use crate::ndmatrix::{
    gelfand_estimate, is_irreducible, spectral_radius, GelfandEstimate, NonnegativeMatrix, SpectralMethod,
};
use crate::perov::{ConvergenceReport, Termination};
use crate::savings::SavingsModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unsupported schema_version {0}, expected 1")]
    SchemaVersion(u32),
    #[error("invalid {kind} payload: {message}")]
    Payload { kind: ModelKind, message: String },
    #[error("CSV error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dp,
    Asset,
    Savings,
    Affine,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Dp => "dp",
            ModelKind::Asset => "asset",
            ModelKind::Savings => "savings",
            ModelKind::Affine => "affine",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dp(DPModel),
    Asset(AssetModel),
    Savings(SavingsModel),
    Affine(AffineModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Dp(_) => ModelKind::Dp,
            Model::Asset(_) => ModelKind::Asset,
            Model::Savings(_) => ModelKind::Savings,
            Model::Affine(_) => ModelKind::Affine,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub metadata: Metadata,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelFile {
    schema_version: u32,
    kind: ModelKind,
    metadata: Metadata,
    payload: serde_json::Value,
}

fn payload<T: for<'de> Deserialize<'de>>(kind: ModelKind, value: serde_json::Value) -> Result<T, IoError> {
    serde_json::from_value(value).map_err(|e| IoError::Payload {
        kind,
        message: e.to_string(),
    })
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let raw: RawModelFile = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(IoError::SchemaVersion(raw.schema_version));
        }
        let model = match raw.kind {
            ModelKind::Dp => Model::Dp(payload(raw.kind, raw.payload)?),
            ModelKind::Asset => Model::Asset(payload(raw.kind, raw.payload)?),
            ModelKind::Savings => Model::Savings(payload(raw.kind, raw.payload)?),
            ModelKind::Affine => Model::Affine(payload(raw.kind, raw.payload)?),
        };
        Ok(Self {
            metadata: raw.metadata,
            model,
        })
    }

    pub fn to_json(&self) -> String {
        let payload = match &self.model {
            Model::Dp(m) => serde_json::to_value(m),
            Model::Asset(m) => serde_json::to_value(m),
            Model::Savings(m) => serde_json::to_value(m),
            Model::Affine(m) => serde_json::to_value(m),
        }
        .expect("validated models serialize");
        to_json(&RawModelFile {
            schema_version: SCHEMA_VERSION,
            kind: self.model.kind(),
            metadata: self.metadata.clone(),
            payload,
        })
    }
}

/// Pretty JSON with floats as `{:.16e}` (17 significant digits).
struct Digits17<'a> {
    inner: PrettyFormatter<'a>,
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.inner.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl Formatter for Digits17<'_> {
    forward!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );

    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as pretty JSON with 17-digit floats and a trailing
/// newline. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let fmt = Digits17 {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// 17 significant digits in scientific notation; `NaN`, `inf`, `-inf` for
/// non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Matrix input for the spectral command: a bare array of rows or
/// `{"matrix": [[...]]}`.
pub fn parse_matrix(text: &str) -> Result<NonnegativeMatrix, IoError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum MatrixDoc {
        Bare(NonnegativeMatrix),
        Wrapped { matrix: NonnegativeMatrix },
    }
    let doc: MatrixDoc = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    Ok(match doc {
        MatrixDoc::Bare(m) | MatrixDoc::Wrapped { matrix: m } => m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub rho: f64,
    pub method: SpectralMethod,
    pub iterations: usize,
    pub residual: f64,
    pub sup_norm: f64,
    pub irreducible: bool,
    /// `||B^n||^{1/n}` for `n = 1, 2, 4, ..., 256`.
    pub gelfand: Vec<GelfandEstimate>,
}

pub fn spectral_report(b: &NonnegativeMatrix) -> SpectralReport {
    let cert = spectral_radius(b);
    SpectralReport {
        rho: cert.rho,
        method: cert.method,
        iterations: cert.iterations,
        residual: cert.residual,
        sup_norm: b.sup_norm(),
        irreducible: is_irreducible(b),
        gelfand: (0..=8).map(|p| gelfand_estimate(b, 1 << p)).collect(),
    }
}

/// Report fields of a run without the per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub iterations: usize,
    pub terminated: Termination,
    pub rho: f64,
    pub inverse_norm: f64,
    pub error_bound: f64,
    pub fitted_rate: Option<f64>,
    pub fitted_constant: Option<f64>,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        Self {
            iterations: r.iterations,
            terminated: r.terminated,
            rho: r.rho,
            inverse_norm: r.inverse_norm,
            error_bound: r.error_bound,
            fitted_rate: r.fitted_rate,
            fitted_constant: r.fitted_constant,
        }
    }
}

fn csv_string(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| IoError::Csv(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

/// `iteration, d_1..d_I, sup_norm`, one row per step starting at 1.
pub fn convergence_csv(report: &ConvergenceReport) -> Result<String, IoError> {
    let dim = report.distances.first().map_or(0, |d| d.dim());
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=dim).map(|i| format!("d_{i}")));
    header.push("sup_norm".into());
    csv_string(
        &header,
        report.distances.iter().enumerate().map(|(n, d)| {
            let mut row = vec![(n + 1).to_string()];
            row.extend(d.components().iter().map(|&x| fmt_f64(x)));
            row.push(fmt_f64(d.sup_norm()));
            row
        }),
    )
}

/// `state, x_index, x_value, V, y_index, y_value`.
pub fn dp_solution_csv(model: &DPModel, value: &GridFunction, policy: &Policy) -> Result<String, IoError> {
    let header: Vec<String> = ["state", "x_index", "x_value", "V", "y_index", "y_value"]
        .map(String::from)
        .to_vec();
    let nx = model.x_grid().len();
    csv_string(
        &header,
        (0..model.states() * nx).map(|idx| {
            let (i, x) = (idx / nx, idx % nx);
            let y = policy.control(i, x);
            vec![
                i.to_string(),
                x.to_string(),
                fmt_f64(model.x_grid()[x]),
                fmt_f64(value.get(i, x)),
                y.to_string(),
                fmt_f64(model.y_grid()[y]),
            ]
        }),
    )
}

/// `state, v`.
pub fn asset_solution_csv(v: &[f64]) -> Result<String, IoError> {
    csv_string(
        &["state".into(), "v".into()],
        v.iter().enumerate().map(|(i, &x)| vec![i.to_string(), fmt_f64(x)]),
    )
}

/// `state, a, c, f, euler_residual`.
pub fn savings_solution_csv(
    model: &SavingsModel,
    consumption: &GridFunction,
    marginal: &GridFunction,
    residuals: &GridFunction,
) -> Result<String, IoError> {
    let header: Vec<String> = ["state", "a", "c", "f", "euler_residual"].map(String::from).to_vec();
    let m = model.grid().len();
    csv_string(
        &header,
        (0..model.states() * m).map(|idx| {
            let (i, k) = (idx / m, idx % m);
            vec![
                i.to_string(),
                fmt_f64(model.grid()[k]),
                fmt_f64(consumption.get(i, k)),
                fmt_f64(marginal.get(i, k)),
                fmt_f64(residuals.get(i, k)),
            ]
        }),
    )
}

/// `component, x`.
pub fn affine_solution_csv(x: &[f64]) -> Result<String, IoError> {
    csv_string(
        &["component".into(), "x".into()],
        x.iter().enumerate().map(|(i, &v)| vec![i.to_string(), fmt_f64(v)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASSET: &str = r#"{
        "schema_version": 1,
        "kind": "asset",
        "metadata": {"name": "gordon"},
        "payload": {"P": [[0.9, 0.1], [0.2, 0.8]], "m": [[0.95, 0.95], [0.95, 0.95]], "G": [[1, 1], [1, 1]]}
    }"#;

    #[test]
    fn parses_and_round_trips_canonical_form() {
        let file = ModelFile::parse(ASSET).unwrap();
        assert_eq!(file.model.kind(), ModelKind::Asset);
        let canonical = file.to_json();
        let again = ModelFile::parse(&canonical).unwrap();
        assert_eq!(again, file);
        assert_eq!(again.to_json(), canonical);
        assert!(canonical.contains("9.4999999999999996e-1"));
    }

    #[test]
    fn rejects_bad_version_kind_and_payload() {
        let v2 = ASSET.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(ModelFile::parse(&v2), Err(IoError::SchemaVersion(2))));
        let unknown = ASSET.replace("\"asset\"", "\"bond\"");
        assert!(matches!(ModelFile::parse(&unknown), Err(IoError::Json(_))));
        let bad = ASSET.replace("[0.9, 0.1]", "[0.9, 0.2]");
        assert!(matches!(ModelFile::parse(&bad), Err(IoError::Payload { kind: ModelKind::Asset, .. })));
        let missing = ASSET.replace("\"schema_version\": 1,", "");
        assert!(ModelFile::parse(&missing).is_err());
    }

    #[test]
    fn seventeen_digit_floats() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(19.0), "1.9000000000000000e1");
        for x in [0.1, 1.0 / 3.0, 2.857142857142857, 1e-300, 6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(to_json(&vec![0.5, f64::NAN]), "[\n  5.0000000000000000e-1,\n  null\n]\n");
    }

    #[test]
    fn matrix_documents() {
        assert_eq!(parse_matrix("[[0.5]]").unwrap().get(0, 0), 0.5);
        assert_eq!(parse_matrix(r#"{"matrix": [[0, 2], [0, 0]]}"#).unwrap().get(0, 1), 2.0);
        assert!(parse_matrix("[[-1]]").is_err());
    }

    #[test]
    fn spectral_report_examples() {
        let r = spectral_report(&parse_matrix("[[0, 2], [0, 0]]").unwrap());
        assert_eq!(r.rho, 0.0);
        assert_eq!(r.gelfand[0].value, 2.0);
        assert_eq!(r.gelfand[1].value, 0.0);
        assert_eq!(r.gelfand.last().unwrap().n, 256);
        assert!(!r.irreducible);
    }
}
