//! Fixed points of generalized contractions on vector-valued metric spaces,
//! applied to dynamic programs whose discount factors depend on a Markov
//! state.
//!
//! A self map `T` with `d(Tx, Ty) <= B d(x, y)` for a nonnegative matrix `B`
//! with spectral radius below one has a unique fixed point reached by
//! iteration, even when individual discount factors exceed one. The crate
//! provides:
//!
//! - [`ndmatrix`]: spectral radius, Neumann series, Perron vectors.
//! - [`perov`]: the iterator with certified stopping and sample-based checks
//!   of the contraction conditions.
//! - [`markov_dp`], [`asset_pricing`], [`savings`]: the three applications.
//! - [`affine`]: affine maps `Av + b`, the simplest generalized contractions.
//! - [`mc_oracle`]: Monte Carlo cross-checks of solved values.
//! - [`sampling`]: seeded random inputs for the sample-based checks.
//! - [`io`]: model files, result documents and CSV traces.

pub mod affine;
pub mod asset_pricing;
pub mod grid;
pub mod io;
pub mod markov_dp;
pub mod mc_oracle;
pub mod ndmatrix;
pub mod perov;
pub mod sampling;
pub mod savings;

pub use grid::{GridFunction, GridSupMetric};
pub use ndmatrix::{NonnegativeMatrix, SpectralCertificate, StochasticMatrix};
pub use perov::{ConvergenceReport, PerovOptions, VectorDistance};
