//! Pseudo-spectral laboratory for rotating stratified Boussinesq flows and
//! their quasi-geostrophic limit.

pub mod boussinesq;
pub mod checkpoint;
pub mod diagnostics;
pub mod dispersion;
pub mod error;
pub mod harness;
pub mod mls;
pub mod qg;
pub mod spectral_core;
pub mod tolerances;
pub mod wave_ops;

pub use boussinesq::{nonlinear_term, Boussinesq, DtPolicy, SimConfig, SolveReport};
pub use diagnostics::{rate_fit, sobolev_norm, time_infimum, wkinf_norm, DiagnosticsRecord, RateFit};
pub use error::{Error, Result};
pub use harness::{make_initial_data, run, DataKind, ExperimentSpec, Scenario, Summary};
pub use mls::{largeness_constant, mls_solve, DecompositionBundle, MlsTrajectory};
pub use dispersion::{AnnulusQuadrature, CmuEntry, DecayFit};
pub use checkpoint::Checkpoint;
pub use qg::{invert_pv, lift, qg_solve, PVField, QgInit, QgState, QgTrajectory};
pub use spectral_core::{
    dealias, leray_project, make_grid, spectral_gradient, to_physical, to_spectral, PhysicalState,
    ScalarField, StateField, WaveGrid,
};
pub use wave_ops::{eigenframe, hessian_det_p, projection_matrix_mu, symbol_l, EigenFrame, FrameTable, PhaseFunction, Which};
