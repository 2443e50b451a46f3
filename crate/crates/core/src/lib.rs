//! Fidelity decay and freeze for kicked tops.
//!
//! Quantum echoes are computed by exact diagonalization of the unperturbed and
//! perturbed Floquet operators inside an invariant symmetry subspace, and
//! compared with semiclassical predictions built from classical correlation
//! sums.

pub mod analysis;
pub mod classical_echo;
pub mod config;
pub mod echo;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod semiclassics;
pub mod spin;
pub mod subspace;

pub use classical_echo::{classical_fidelity_series, gaussian_patch_ensemble, ClassicalFidelity, OverlapEstimator};
pub use config::{figure_preset, parse_and_validate, Experiment, FigureBundle, FigureName, RunSpec};
pub use echo::{fidelity_series, renormalized_fidelity_series, EchoMode, EchoRunConfig, FidelitySample, FidelitySeries};
pub use error::{FreezeError, Result};
pub use models::{coupled_tops, single_top, InitialState, ModelKind, ModelParams, TopModel};
pub use semiclassics::{PredictionSet, SigmaEstimate, StateKind};
pub use spin::SpinRep;
pub use faer::c64;
