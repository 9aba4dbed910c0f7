//! Explicit instability constructions: drifting orbits for linear integrable
//! parts, the Marco–Sauzin coupled-map machine and Bessi-type perturbations.

mod bessi;
mod diffusion;
mod ms;

pub use bessi::{build_bessi, BessiExample, BessiSource, BessiTerm};
pub use diffusion::{build_linear_diffusion, run_linear_diffusion, DiffusionExample, DiffusionRun};
pub use ms::{
    build_ms, eta, eta_check, eta_series, eta_with_deriv, exclusion_margin, fourier_norm_estimate, primes, psi_q, psi_q_orbit, timing_fit, wrap,
    BjExponent, Bump, CoupledMap, CouplingMode, DriftRun, EtaCheck, MapState, MSConstruction, MsOptions, SyncFactor, SyncReport, TimingFit, TimingRow,
};
