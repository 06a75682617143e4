//! Biclustering with mixtures of Gaussians whose covariances are
//! block-diagonal after a column permutation.
//!
//! Component `k` has covariance `Σ_k = B_k T_k B_kᵀ + D_k`, where `B_k`
//! assigns each variable to one of `q_k` column clusters, `T_k` is a
//! diagonal matrix of block covariances and `D_k` is diagonal noise.
//! Constraining each of `B`, `T`, `D` and the isotropy of `D` gives sixteen
//! models; [`selection::model_search`] fits a grid of them and ranks the
//! fits by BIC.
//!
//! ```
//! use bicluster::{simulation, selection, ModelSpec};
//!
//! let ds = simulation::generate_study1::<f64>(1);
//! let spec: ModelSpec = "CCCC".parse().unwrap();
//! let cands = selection::enumerate_candidates(&[spec], &[3], &[3], 8, None, 7).unwrap();
//! let report = selection::model_search(&ds.data, &cands, &Default::default()).unwrap();
//! assert_eq!(report.best().unwrap().candidate.k, 3);
//! ```

mod assign;
pub mod engine;
pub mod error;
pub mod family;
pub mod init;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod selection;
pub mod simulation;

pub use engine::{fit, FitControls, FitResult, Responsibilities};
pub use error::{Error, Result};
pub use family::{parameter_count, validate_spec, ModelSpec, Widths};
pub use init::{InitOptions, InitialState, PartitionStrategy};
pub use model::{assemble_covariance, ColumnAssignment, ComponentParams, DataMatrix, MixtureParams};
pub use scalar::Scalar;
pub use selection::{model_search, Candidate, SearchControls, SearchReport};

pub type DataMatrix64 = DataMatrix<f64>;
pub type DataMatrix32 = DataMatrix<f32>;
pub type MixtureParams64 = MixtureParams<f64>;
pub type MixtureParams32 = MixtureParams<f32>;
pub type FitResult64 = FitResult<f64>;
pub type FitResult32 = FitResult<f32>;
pub type SearchReport64 = SearchReport<f64>;
pub type SearchReport32 = SearchReport<f32>;
